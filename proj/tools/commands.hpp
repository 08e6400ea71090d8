#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ymca::cli {

struct CommonOptions {
  std::filesystem::path config;
  std::optional<unsigned long long> seed;
  std::filesystem::path out = ".";
};

int gen_bench(const CommonOptions& opt);
int meta_train(const CommonOptions& opt);
int run(const CommonOptions& opt);
int ablate(const CommonOptions& opt);
int featsel(const CommonOptions& opt);
int report(const std::vector<std::filesystem::path>& manifests, const std::optional<std::filesystem::path>& out);

}  // namespace ymca::cli
