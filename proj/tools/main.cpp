#include <iostream>

#include <CLI11.hpp>

#include "fillmin/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fillmin: sparse-matrix fill-reducing ordering toolkit"};
  app.require_subcommand(1);

  fillmin::cli::OrderOptions order_opts;
  auto* order = app.add_subcommand("order", "Compute a fill-reducing ordering");
  order->add_option("--matrix", order_opts.matrix_path, "Matrix Market file")->required();
  order->add_option("--method", order_opts.method,
                    "natural | rcm | md | fiedler | pfm")->required();
  order->add_option("--out", order_opts.out_path, "Output permutation file")->required();
  order->add_option("--checkpoint", order_opts.checkpoint_path,
                    "Trained checkpoint (pfm only)");

  fillmin::cli::FillinOptions fillin_opts;
  auto* fillin = app.add_subcommand(
      "fillin", "Report structural Cholesky fill under an ordering");
  fillin->add_option("--matrix", fillin_opts.matrix_path, "Matrix Market file")->required();
  fillin->add_option("--perm", fillin_opts.perm_path,
                     "Permutation file (default: natural order)");

  fillmin::cli::BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "Benchmark orderings over a matrix set");
  bench->add_option("--matrices", bench_opts.matrices_glob,
                    "Matrix files (glob in last path component)")->required();
  bench->add_option("--methods", bench_opts.methods, "Ordering methods")
      ->required()
      ->delimiter(',');
  bench->add_option("--out", bench_opts.out_csv, "Output CSV path")->required();
  bench->add_option("--checkpoint", bench_opts.checkpoint_path,
                    "Trained checkpoint (pfm only)");
  bench->add_option("--jobs", bench_opts.jobs, "Worker threads")->default_val(1);

  fillmin::cli::TrainOptions train_opts;
  auto* train = app.add_subcommand("train", "Train the reordering model");
  train->add_option("--matrices", train_opts.matrices_glob, "Training matrices")->required();
  train->add_option("--config", train_opts.config_path, "key=value config file")->required();
  train->add_option("--out", train_opts.out_checkpoint, "Output checkpoint path")->required();

  fillmin::cli::GenerateOptions gen_opts;
  auto* generate = app.add_subcommand("generate", "Write a synthetic test matrix");
  generate->add_option("--kind", gen_opts.kind, "grid | random-spd")->required();
  generate->add_option("--params", gen_opts.params,
                       "grid: rows=R,cols=C; random-spd: n=N,density=D,seed=S")
      ->required();
  generate->add_option("--out", gen_opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : fillmin::cli::kExitInput;
  }

  if (order->parsed()) return fillmin::cli::run_order(order_opts, std::cerr);
  if (fillin->parsed())
    return fillmin::cli::run_fillin(fillin_opts, std::cout, std::cerr);
  if (bench->parsed()) return fillmin::cli::run_bench(bench_opts, std::cerr);
  if (train->parsed())
    return fillmin::cli::run_train(train_opts, std::cout, std::cerr);
  if (generate->parsed()) return fillmin::cli::run_generate(gen_opts, std::cerr);
  return fillmin::cli::kExitInput;
}
