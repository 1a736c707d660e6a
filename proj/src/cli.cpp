#include "fillmin/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fillmin/errors.hpp"
#include "fillmin/fill.hpp"
#include "fillmin/orderings.hpp"

namespace fillmin::cli {

namespace fs = std::filesystem;

namespace {

SparseSymMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open matrix file '" + path + "'");
  return parse_matrix_market(in);
}

Permutation compute_ordering(const SparseSymMatrix& a, OrderingMethod method,
                             const EncoderParams* params) {
  switch (method) {
    case OrderingMethod::Natural:
      return natural_ordering(a.n);
    case OrderingMethod::ReverseCuthillMcKee:
      return reverse_cuthill_mckee(to_graph(a));
    case OrderingMethod::MinimumDegree:
      return minimum_degree(to_graph(a));
    case OrderingMethod::Fiedler:
      return fiedler_ordering(to_graph(a));
    case OrderingMethod::Pfm:
      if (!params) throw InputError("pfm ordering needs a checkpoint");
      return infer_ordering(a, *params);
  }
  throw InputError("bad ordering method");
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

bool wildcard_match(const std::string& pattern, const std::string& text) {
  std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

}  // namespace

std::vector<std::string> expand_glob(const std::string& pattern) {
  fs::path p(pattern);
  std::string leaf = p.filename().string();
  if (leaf.find_first_of("*?") == std::string::npos) return {pattern};
  fs::path dir = p.parent_path();
  if (dir.empty()) dir = ".";
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (wildcard_match(leaf, entry.path().filename().string()))
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_order(const OrderOptions& opts, std::ostream& err) {
  try {
    OrderingMethod method = ordering_method_from_string(opts.method);
    if (method == OrderingMethod::Pfm && opts.checkpoint_path.empty()) {
      err << "error: --method pfm requires --checkpoint\n";
      return kExitInput;
    }
    SparseSymMatrix a = load_matrix(opts.matrix_path);
    std::optional<EncoderParams> params;
    if (method == OrderingMethod::Pfm) {
      std::ifstream in(opts.checkpoint_path);
      if (!in) throw InputError("cannot open checkpoint '" + opts.checkpoint_path + "'");
      params = load_checkpoint(in);
    }
    Permutation perm;
    try {
      perm = compute_ordering(a, method, params ? &*params : nullptr);
    } catch (const MethodError& e) {
      err << "error: " << e.what() << "\n";
      return kExitMethod;
    }
    std::ofstream out(opts.out_path);
    if (!out) throw InputError("cannot write '" + opts.out_path + "'");
    write_permutation(perm, out);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitMethod;
  }
}

int run_fillin(const FillinOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    SparseSymMatrix a = load_matrix(opts.matrix_path);
    Permutation perm = Permutation::identity(a.n);
    if (!opts.perm_path.empty()) {
      std::ifstream in(opts.perm_path);
      if (!in) throw InputError("cannot open permutation '" + opts.perm_path + "'");
      perm = read_permutation(in);
      if (perm.n() != a.n)
        throw InputError("permutation size " + std::to_string(perm.n()) +
                         " does not match matrix size " + std::to_string(a.n));
    }
    out << symbolic_fill(a, perm).to_json() << "\n";
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

namespace {

struct BenchRow {
  std::string matrix_id;
  std::string n;
  std::string nnz;
  std::string method;
  std::string fill_count;
  std::string fill_ratio;
  std::string time_or_note;
};

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(15);
  os << v;
  return os.str();
}

}  // namespace

int run_bench(const BenchOptions& opts, std::ostream& err) {
  try {
    std::vector<std::string> files = expand_glob(opts.matrices_glob);
    if (files.empty()) {
      err << "error: no matrices match '" << opts.matrices_glob << "'\n";
      return kExitInput;
    }
    std::vector<OrderingMethod> methods;
    for (const auto& name : opts.methods)
      methods.push_back(ordering_method_from_string(name));
    if (methods.empty()) {
      err << "error: no methods requested\n";
      return kExitInput;
    }

    std::optional<EncoderParams> pfm_params;
    std::string pfm_error;
    if (std::find(methods.begin(), methods.end(), OrderingMethod::Pfm) != methods.end()) {
      if (opts.checkpoint_path.empty()) {
        pfm_error = "pfm requires --checkpoint";
      } else {
        try {
          std::ifstream in(opts.checkpoint_path);
          if (!in) throw InputError("cannot open checkpoint '" + opts.checkpoint_path + "'");
          pfm_params = load_checkpoint(in);
        } catch (const std::exception& e) {
          pfm_error = e.what();
        }
      }
    }

    struct Loaded {
      std::string id;
      std::optional<SparseSymMatrix> matrix;
      std::string error;
    };
    std::vector<Loaded> loaded;
    int ok_count = 0;
    for (const auto& path : files) {
      Loaded l;
      l.id = fs::path(path).stem().string();
      try {
        l.matrix = load_matrix(path);
        ++ok_count;
      } catch (const std::exception& e) {
        l.error = e.what();
      }
      loaded.push_back(std::move(l));
    }
    if (ok_count == 0) {
      err << "error: no matrix could be loaded\n";
      return kExitInput;
    }

    struct Task {
      const Loaded* matrix;
      OrderingMethod method;
      std::string method_name;
    };
    std::vector<Task> tasks;
    for (const auto& l : loaded)
      for (std::size_t mi = 0; mi < methods.size(); ++mi)
        tasks.push_back({&l, methods[mi], opts.methods[mi]});

    std::vector<BenchRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) break;
        const Task& task = tasks[i];
        BenchRow& row = rows[i];
        row.matrix_id = task.matrix->id;
        row.method = task.method_name;
        if (!task.matrix->matrix) {
          row.time_or_note = "error: " + task.matrix->error;
          continue;
        }
        const SparseSymMatrix& a = *task.matrix->matrix;
        row.n = std::to_string(a.n);
        row.nnz = std::to_string(a.nnz());
        if (task.method == OrderingMethod::Pfm && !pfm_params) {
          row.time_or_note = "error: " + pfm_error;
          continue;
        }
        try {
          auto t0 = std::chrono::steady_clock::now();
          Permutation perm = compute_ordering(a, task.method,
                                              pfm_params ? &*pfm_params : nullptr);
          auto t1 = std::chrono::steady_clock::now();
          double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
          FillReport report = symbolic_fill(a, perm);
          row.fill_count = std::to_string(report.fill_count);
          row.fill_ratio = format_double(report.fill_ratio);
          row.time_or_note = format_double(ms);
        } catch (const std::exception& e) {
          row.time_or_note = std::string("error: ") + e.what();
        }
      }
    };
    int jobs = std::max(1, opts.jobs);
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
      return std::tie(a.matrix_id, a.method) < std::tie(b.matrix_id, b.method);
    });

    std::ofstream out(opts.out_csv);
    if (!out) {
      err << "error: cannot write '" << opts.out_csv << "'\n";
      return kExitInput;
    }
    out << "matrix_id,n,nnz_A,method,fill_count,fill_ratio,ordering_time_ms\n";
    for (const BenchRow& r : rows)
      out << csv_quote(r.matrix_id) << "," << r.n << "," << r.nnz << ","
          << csv_quote(r.method) << "," << r.fill_count << "," << r.fill_ratio
          << "," << csv_quote(r.time_or_note) << "\n";
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

PfmConfig parse_train_config(std::istream& in) {
  PfmConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos)
      sv = sv.substr(0, hash);
    while (!sv.empty() && std::isspace(static_cast<unsigned char>(sv.front())))
      sv.remove_prefix(1);
    while (!sv.empty() && std::isspace(static_cast<unsigned char>(sv.back())))
      sv.remove_suffix(1);
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw InputError("config line " + std::to_string(lineno) +
                       " is not key=value: '" + std::string(sv) + "'");
    std::string key(sv.substr(0, eq));
    std::string value(sv.substr(eq + 1));
    auto trim = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    };
    trim(key);
    trim(value);
    try {
      if (key == "lr") cfg.lr = std::stod(value);
      else if (key == "sigma") cfg.sigma = std::stod(value);
      else if (key == "rho") cfg.rho = std::stod(value);
      else if (key == "eta") cfg.eta = std::stod(value);
      else if (key == "eta_step") cfg.eta_step = std::stod(value);
      else if (key == "eta_threshold") cfg.eta_threshold = std::stod(value);
      else if (key == "n_admm") cfg.n_admm = std::stoi(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "adam_beta1") cfg.adam_beta1 = std::stod(value);
      else if (key == "adam_beta2") cfg.adam_beta2 = std::stod(value);
      else if (key == "adam_eps") cfg.adam_eps = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "warm_start") cfg.warm_start = (value == "1" || value == "true");
      else if (key == "backtracking") cfg.backtracking = (value == "1" || value == "true");
      else if (key == "l_init") cfg.l_init_identity = (value == "identity");
      else if (key == "dense_bound") cfg.dense_bound = std::stoi(value);
      else if (key == "tau") cfg.gumbel.tau = std::stod(value);
      else if (key == "n_iters") cfg.gumbel.n_iters = std::stoi(value);
      else if (key == "eps") cfg.gumbel.eps = std::stod(value);
      else if (key == "noise_scale") cfg.gumbel.noise_scale = std::stod(value);
      else if (key == "mode") cfg.encoder.mode = encoder_mode_from_string(value);
      else if (key == "hidden_dim") cfg.encoder.hidden_dim = std::stoi(value);
      else if (key == "encoder_seed") cfg.encoder.seed = std::stoull(value);
      else
        throw InputError("unknown config key '" + key + "'");
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw InputError("bad value for config key '" + key + "': '" + value + "'");
    }
  }
  if (const char* env = std::getenv("FILLIN_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw InputError("FILLIN_SEED is not an integer");
    }
  }
  cfg.gumbel.sigma = cfg.sigma;
  cfg.gumbel.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

int run_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream cf(opts.config_path);
    if (!cf) throw InputError("cannot open config '" + opts.config_path + "'");
    PfmConfig cfg = parse_train_config(cf);

    std::vector<std::string> files = expand_glob(opts.matrices_glob);
    if (files.empty())
      throw InputError("no matrices match '" + opts.matrices_glob + "'");
    std::vector<std::pair<std::string, SparseSymMatrix>> matrices;
    for (const auto& path : files)
      matrices.emplace_back(fs::path(path).stem().string(), load_matrix(path));

    EncoderParams params = train(matrices, cfg, [&out](const TrainLogEntry& e) {
      nlohmann::json j;
      j["epoch"] = e.epoch;
      j["matrix_id"] = e.matrix_id;
      j["k"] = e.k;
      j["l1"] = e.l1;
      j["dual"] = e.dual;
      j["quad"] = e.quad;
      j["residual_fro"] = e.residual_fro;
      out << j.dump() << "\n";
    });

    std::ofstream ck(opts.out_checkpoint);
    if (!ck) throw InputError("cannot write '" + opts.out_checkpoint + "'");
    save_checkpoint(params, ck);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitMethod;
  }
}

namespace {

std::map<std::string, std::string> parse_params(const std::string& spec) {
  std::map<std::string, std::string> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InputError("parameter '" + item + "' is not key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

std::string require(const std::map<std::string, std::string>& params,
                    const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw InputError("missing parameter '" + key + "'");
  return it->second;
}

}  // namespace

int run_generate(const GenerateOptions& opts, std::ostream& err) {
  try {
    auto params = parse_params(opts.params);
    fs::create_directories(opts.out_dir);
    SparseSymMatrix a;
    std::string name;
    if (opts.kind == "grid") {
      int rows = std::stoi(require(params, "rows"));
      int cols = std::stoi(require(params, "cols"));
      for (const auto& [k, v] : params)
        if (k != "rows" && k != "cols")
          throw InputError("unknown grid parameter '" + k + "'");
      a = generate_grid_laplacian(rows, cols);
      name = "grid_" + std::to_string(rows) + "x" + std::to_string(cols) + ".mtx";
    } else if (opts.kind == "random-spd") {
      int n = std::stoi(require(params, "n"));
      double density = std::stod(require(params, "density"));
      std::uint64_t seed = std::stoull(require(params, "seed"));
      for (const auto& [k, v] : params)
        if (k != "n" && k != "density" && k != "seed")
          throw InputError("unknown random-spd parameter '" + k + "'");
      a = generate_random_spd(n, density, seed);
      char buf[64];
      std::snprintf(buf, sizeof buf, "rspd_n%d_d%g_s%llu.mtx", n, density,
                    static_cast<unsigned long long>(seed));
      name = buf;
    } else {
      throw InputError("unknown kind '" + opts.kind + "' (grid or random-spd)");
    }
    fs::path out_path = fs::path(opts.out_dir) / name;
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write '" + out_path.string() + "'");
    write_matrix_market(a, out);
    return kExitOk;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace fillmin::cli
