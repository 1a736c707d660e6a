#ifndef FILLMIN_ENCODER_HPP
#define FILLMIN_ENCODER_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fillmin/sparse.hpp"
#include "fillmin/tape.hpp"

namespace fillmin {

struct EncoderConfig {
  enum class Mode { Direct, Sage, Multigrid };
  Mode mode = Mode::Multigrid;
  int hidden_dim = 16;
  int num_conv_layers = 2;  // per level
  int head_layers = 4;      // linear layers, last one emits the scalar score
  std::uint64_t seed = 0;
};

EncoderConfig::Mode encoder_mode_from_string(const std::string& name);
std::string to_string(EncoderConfig::Mode mode);

/// Named weight tensors; map keeps a stable name order for deterministic
/// initialization and serialization.
struct EncoderParams {
  EncoderConfig config;
  int input_dim = 2;  // feature width the first conv expects
  int direct_n = 0;   // direct mode: one score per node
  std::map<std::string, Eigen::MatrixXd> tensors;
};

// Standard-normal node features, deterministic per seed (n x 1).
Eigen::MatrixXd init_features(int n, std::uint64_t seed);

// Per-node [fiedler_value, normalized_degree] features (n x 2). The Fiedler
// value is computed per connected component.
Eigen::MatrixXd spectral_features(const GraphView& g, double tol = 1e-8,
                                  int max_iter = 1000);

EncoderParams init_encoder_params(const EncoderConfig& cfg, int input_dim);
EncoderParams init_direct_params(const EncoderConfig& cfg,
                                 const Eigen::VectorXd& initial_scores);

/// Weight tensors registered on a tape, addressable by name.
struct TapeParams {
  std::map<std::string, ad::NodeId> id;

  ad::NodeId at(const std::string& name) const;
};

TapeParams register_params(ad::Tape& tape, const EncoderParams& params,
                           bool requires_grad = true);

// H' = tanh(H W_self + meanNeighbor(H) W_neigh).
ad::NodeId sage_layer(ad::Tape& tape, ad::NodeId h, const GraphView& g,
                      ad::NodeId w_self, ad::NodeId w_neigh);

// Greedy heavy-edge matching: edges by descending weight, ties by index pair.
// Returns the coarse graph (aggregated edge weights) and the fine-to-coarse
// cluster map. Coarse ids ascend with the smallest member index.
std::pair<GraphView, std::vector<int>> coarsen(const GraphView& g);

// Scores Y (n x 1) on the tape for any encoder mode. `features` is ignored in
// direct mode.
ad::NodeId encoder_scores(ad::Tape& tape, const EncoderConfig& cfg,
                          const TapeParams& params, const GraphView& g,
                          const Eigen::MatrixXd& features);

// Direct mode: Y = theta, with a size check against n.
ad::NodeId direct_scores(ad::Tape& tape, ad::NodeId theta, int n);

void save_checkpoint(const EncoderParams& params, std::ostream& out);
EncoderParams load_checkpoint(std::istream& in);

}  // namespace fillmin

#endif  // FILLMIN_ENCODER_HPP
