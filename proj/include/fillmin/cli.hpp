#ifndef FILLMIN_CLI_HPP
#define FILLMIN_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "fillmin/pfm.hpp"

namespace fillmin::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitMethod = 3;
inline constexpr int kExitDivergence = 4;

struct OrderOptions {
  std::string matrix_path;
  std::string method;
  std::string out_path;
  std::string checkpoint_path;  // required for pfm
};

struct FillinOptions {
  std::string matrix_path;
  std::string perm_path;  // empty: natural order
};

struct BenchOptions {
  std::string matrices_glob;
  std::vector<std::string> methods;
  std::string out_csv;
  std::string checkpoint_path;  // used by the pfm method
  int jobs = 1;
};

struct TrainOptions {
  std::string matrices_glob;
  std::string config_path;
  std::string out_checkpoint;
};

struct GenerateOptions {
  std::string kind;    // grid | random-spd
  std::string params;  // comma-separated key=value list
  std::string out_dir;
};

int run_order(const OrderOptions& opts, std::ostream& err);
int run_fillin(const FillinOptions& opts, std::ostream& out, std::ostream& err);
int run_bench(const BenchOptions& opts, std::ostream& err);
int run_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int run_generate(const GenerateOptions& opts, std::ostream& err);

// Plain-text key=value training config; unknown keys are rejected. The
// FILLIN_SEED environment variable overrides the configured seed.
PfmConfig parse_train_config(std::istream& in);

// Shell-style '*' / '?' wildcards in the last path component; matches are
// sorted. A plain path returns itself.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace fillmin::cli

#endif  // FILLMIN_CLI_HPP
