#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "framer/ops.hpp"
#include "framer/rng.hpp"
#include "framer/spectral.hpp"
#include "framer/tensor.hpp"

namespace framer {

enum class BranchKind { None, Intra, Inter };
enum class DistillObjective { None, Mse, MseFreq, ClFreq };
enum class TeacherSelect { Final, FinalMinus1, FinalMinus2, Random };
enum class NegativeSelect { RandomLayer, PreviousLayer };

struct LossConfig {
  DistillObjective objective = DistillObjective::ClFreq;
  BranchKind lf_kind = BranchKind::Intra;  // low band gets the intra loss
  BranchKind hf_kind = BranchKind::Inter;  // high band gets the inter loss
  bool use_faw = true;
  bool use_fam = true;
  bool detach_teacher = false;
  TeacherSelect teacher_select = TeacherSelect::Final;
  NegativeSelect negative_select = NegativeSelect::RandomLayer;
  // One negative draw per (sample, layer, step) is shared by both branches;
  // set to redraw independently per branch.
  bool redraw_per_branch = false;
};

// Per-layer adaptive coefficients. All of these are step constants: they
// scale the branch losses but are excluded from differentiation.
struct LayerModulation {
  std::size_t layer = 0;
  double w_lf = 0.5, w_hf = 0.5;        // adaptive weights, sum to 1
  double a_lf = 1.0, a_hf = 1.0;        // alignment gates in [0,1]
  double gated_lf = 0.5, gated_hf = 0.5;  // w * a, the applied coefficients
  double delta_lf = 0.0, delta_hf = 0.0;  // relative band-energy differences
};

struct NegativeDraw {
  std::size_t student = 0;   // layer i
  std::size_t negative = 0;  // drawn layer j
  std::uint64_t rng_state_before = 0;
};

struct LayerLossRecord {
  std::size_t layer = 0;
  double intra = 0.0;  // batch mean of branches using the intra form
  double inter = 0.0;  // batch mean of branches using the inter form
  double framer = 0.0;
  LayerModulation mod;  // batch-averaged
};

struct LossBreakdown {
  double noise = 0.0;
  double total = 0.0;
  std::vector<LayerLossRecord> layers;
};

// Cosine similarity of two same-shape tensors, differentiable. A zero-norm
// operand makes the similarity 0 by convention (degenerate toy features);
// a warning is printed once per process.
Tensor cosine_sim(const Tensor& a, const Tensor& b);

// -log( e^{s+} / (e^{s+} + e^{s-}) ) with s+ = sim(student, teacher) and
// s- = sim(student, negative), via stable log-sum-exp.
Tensor intra_cl(const Tensor& student, const Tensor& teacher,
                const Tensor& negative);

// Adds in-batch negatives to the denominator: features of other samples at
// the same layer and band.
Tensor inter_cl(const Tensor& student, const Tensor& teacher,
                const Tensor& negative,
                const std::vector<Tensor>& batch_negatives);

// j ~ Uniform({1..n} \ {i, teacher}); the default teacher is layer n.
// Requires at least one candidate (n >= 3 in the default case).
NegativeDraw draw_negative_layer(std::size_t i, std::size_t n, Rng& rng);
NegativeDraw draw_negative_layer(std::size_t i, std::size_t n,
                                 std::size_t teacher, Rng& rng);

struct FawResult {
  double w_lf = 0.5, w_hf = 0.5;
  double delta_lf = 0.0, delta_hf = 0.0;
};

// delta = |E_teacher - E_student| / (E_student + eps) per band, weights a
// two-way softmax over the deltas.
FawResult faw_from_energies(const BandEnergy& student, const BandEnergy& teacher);

// Energies from the raw (pre-normalization) feature magnitudes.
FawResult faw_weights(std::span<const double> student_feature,
                      std::span<const double> teacher_feature,
                      std::size_t channels, const BandMasks& masks);

struct FamResult {
  double a_lf = 1.0, a_hf = 1.0;
};

// ReLU-clamped cosine between band reconstructions, computed on plain
// arrays so no gradient path can exist.
FamResult fam_gates(std::span<const double> student_lf,
                    std::span<const double> teacher_lf,
                    std::span<const double> student_hf,
                    std::span<const double> teacher_hf);

LayerModulation compute_modulation(std::size_t layer,
                                   std::span<const double> student_raw,
                                   std::span<const double> teacher_raw,
                                   std::size_t channels,
                                   std::span<const double> student_lf,
                                   std::span<const double> teacher_lf,
                                   std::span<const double> student_hf,
                                   std::span<const double> teacher_hf,
                                   const BandMasks& masks,
                                   const LossConfig& cfg);

// One layer's distillation loss over a batch. All tensors are [C,H,W]
// slices, already shape-adapted to the teacher.
struct LayerLossInputs {
  std::size_t layer = 0;
  std::vector<Tensor> student;
  std::vector<Tensor> teacher;
  std::vector<Tensor> negative;           // used by contrastive branches
  std::vector<Tensor> negative_redraw;    // optional second draw per branch
};

struct LayerLossResult {
  Tensor loss;  // batch-mean layer loss
  LayerLossRecord record;
};

LayerLossResult layer_framer_loss(const LayerLossInputs& in,
                                  const BandMasks& masks,
                                  const LossConfig& cfg);

// total = noise + sum of per-layer losses; throws on non-finite components,
// naming the offending layer.
struct TotalLoss {
  Tensor loss;
  LossBreakdown breakdown;
};

TotalLoss total_loss(const Tensor& noise_loss,
                     const std::vector<LayerLossResult>& layer_losses);

}  // namespace framer
