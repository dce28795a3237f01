#include "gwgen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "gwgen/error.hpp"
#include "json.hpp"

namespace gwgen {

namespace {

double max_entry(const Matrix& m) { return m.size() == 0 ? 0.0 : m.maxCoeff(); }

const char* step_name(StepKind k) { return k == StepKind::generator ? "generator" : "adversary"; }

const char* penalty_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::tv: return "tv";
    case PenaltyKind::style: return "style";
  }
  return "?";
}

// Regularizer on one adversary branch; gradient is with respect to the branch
// features (Procrustes) or stays empty (layerwise terms act on weights).
struct BranchReg {
  double value = 0.0;
  Matrix feature_grad;
};

BranchReg procrustes_branch(const BranchFeatures& b, double beta) {
  const PenaltyResult r = procrustes_penalty(b.features, b.inputs, beta);
  return {r.value, r.grad};
}

}  // namespace

DataBatch FunctionSampler::sample(Index m, Rng& rng) const {
  DataBatch b;
  b.features = draw_(m, rng);
  if (b.features->rows() != m || b.features->cols() != dim_)
    throw ShapeMismatch("sampler returned a batch of the wrong shape");
  return b;
}

PrecomputedSampler::PrecomputedSampler(DistanceMatrix distances, std::optional<Matrix> features)
    : distances_(std::move(distances)), features_(std::move(features)) {
  if (features_ && features_->rows() != distances_.size())
    throw ShapeMismatch("features and distances describe different point counts");
}

DataBatch PrecomputedSampler::sample(Index m, Rng& rng) const {
  const Index n = distances_.size();
  if (m > n) throw InvalidInput("batch larger than the reference set");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  // Partial Fisher-Yates; deterministic for a given engine state.
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());

  const Matrix full = distances_.original();
  Matrix sub(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) sub(a, b) = full(idx[a], idx[b]);
  DataBatch out;
  out.distances = std::move(sub);
  if (features_) {
    Matrix f(m, features_->cols());
    for (Index a = 0; a < m; ++a) f.row(a) = features_->row(idx[a]);
    out.features = std::move(f);
  }
  return out;
}

std::string to_string(OrthMode m) {
  switch (m) {
    case OrthMode::procrustes: return "procrustes";
    case OrthMode::layerwise_full: return "layerwise_full";
    case OrthMode::layerwise_offdiag: return "layerwise_offdiag";
    case OrthMode::saxe_init_only: return "saxe_init_only";
  }
  return "?";
}

OrthMode orth_mode_from_string(const std::string& s) {
  if (s == "procrustes") return OrthMode::procrustes;
  if (s == "layerwise_full") return OrthMode::layerwise_full;
  if (s == "layerwise_offdiag") return OrthMode::layerwise_offdiag;
  if (s == "saxe_init_only") return OrthMode::saxe_init_only;
  throw InvalidInput("unknown orthogonality mode: " + s);
}

void TrainConfig::validate() const {
  gw.validate();
  if (!(lr > 0.0)) throw InvalidInput("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidInput("Adam betas must lie in [0, 1)");
  if (n_g < 1) throw InvalidInput("n_g must be >= 1");
  if (batch < 2) throw InvalidInput("batch must be >= 2");
  if (iterations < 0) throw InvalidInput("iterations must be nonnegative");
  if (beta < 0.0) throw InvalidInput("beta must be nonnegative");
  if (noise_dim < 1) throw InvalidInput("noise_dim must be >= 1");
  if (checkpoint_every < 1) throw InvalidInput("checkpoint_every must be >= 1");
  if (!(divergence_threshold > 0.0)) throw InvalidInput("divergence_threshold must be positive");
  for (const auto& p : gen_penalties) {
    if (p.lambda < 0.0) throw InvalidInput("penalty weights must be nonnegative");
    if (p.kind == PenaltyKind::style && !style)
      throw InvalidInput("style penalty configured without a style adversary");
  }
}

StepKind adversary_schedule(int t, int n_g) {
  if (n_g < 1) throw InvalidInput("n_g must be >= 1");
  if (t < 0) throw InvalidInput("iteration index must be nonnegative");
  return (t % (n_g + 1) == n_g) ? StepKind::adversary : StepKind::generator;
}

TrainState make_train_state(const TrainConfig& cfg, Index data_dim, Index output_dim, bool learned,
                            Index hidden) {
  if (output_dim < 1 || hidden < 1) throw InvalidInput("network widths must be positive");
  TrainState s;
  s.generator = DenseNet({cfg.noise_dim, hidden, hidden, output_dim});
  orthogonal_init(s.generator, cfg.seed * 2 + 1);
  s.generator_opt = AdamState::for_net(s.generator, cfg.lr, cfg.beta1, cfg.beta2);
  if (learned) {
    if (data_dim < 1) throw InvalidInput("a learned adversary needs data features");
    s.adversary = DenseNet({data_dim, hidden, hidden, data_dim});
    orthogonal_init(*s.adversary, cfg.seed * 2 + 2);
    s.adversary_opt = AdamState::for_net(*s.adversary, cfg.lr, cfg.beta1, cfg.beta2);
    if (data_dim != output_dim) {
      // Different spaces get their own feature maps.
      s.generated_adversary = DenseNet({output_dim, hidden, hidden, output_dim});
      orthogonal_init(*s.generated_adversary, cfg.seed * 2 + 3);
      s.generated_adversary_opt =
          AdamState::for_net(*s.generated_adversary, cfg.lr, cfg.beta1, cfg.beta2);
    }
  }
  return s;
}

std::string to_json_line(const IterationRecord& r) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["step"] = step_name(r.step);
  j["gw_loss"] = r.gw_loss;
  j["gw_entropic_loss"] = r.gw_entropic_loss;
  j["adversary_reg"] = r.adversary_reg;
  j["penalties"] = r.penalties;
  j["marginal_violation"] = r.marginal_violation;
  j["feature_stretch"] = r.feature_stretch;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

void write_jsonl(std::ostream& out, const MetricsLog& log) {
  for (const auto& r : log.records) out << to_json_line(r) << '\n';
}

BranchFeatures embed_branch(const Matrix& inputs, const DenseNet* adversary) {
  BranchFeatures b;
  b.inputs = inputs;
  if (adversary) {
    ForwardResult fr = forward(*adversary, inputs);
    b.features = std::move(fr.output);
    b.adversary_tape = std::move(fr.tape);
  } else {
    b.features = inputs;
  }
  b.distances = pairwise_euclidean(b.features);
  return b;
}

Matrix gw_output_gradient(const DistanceMatrix& data_distances, const BranchFeatures& generated,
                          const NormalizedGw& solved, const DenseNet* adversary) {
  const Matrix dd = normalized_gw_grad_dbar(data_distances, generated.distances, solved);
  Matrix g = pairwise_euclidean_backward(generated.features, dd);
  if (adversary) {
    if (!generated.adversary_tape) throw InvalidInput("generated branch has no adversary tape");
    g = backward(*adversary, *generated.adversary_tape, g).input_grad;
  }
  return g;
}

GradientSet generator_gw_gradient(const DenseNet& generator, const Tape& generator_tape,
                                  const DistanceMatrix& data_distances, const Matrix& y,
                                  const DenseNet* adversary, const GwConfig& cfg,
                                  NormalizedGw* solved_out) {
  if (y.rows() != data_distances.size()) throw ShapeMismatch("batch sizes differ");
  const BranchFeatures gen = embed_branch(y, adversary);
  const Index m = y.rows();
  NormalizedGw solved = normalized_gw(data_distances, gen.distances, ProbabilityVector::uniform(m),
                                      ProbabilityVector::uniform(m), cfg);
  const Matrix gy = gw_output_gradient(data_distances, gen, solved, adversary);
  GradientSet grads = backward(generator, generator_tape, gy).grads;
  if (solved_out) *solved_out = std::move(solved);
  return grads;
}

Matrix sample_noise(Index m, Index noise_dim, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix z(m, noise_dim);
  // Row-major draw order so a batch prefix does not depend on the batch size.
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < noise_dim; ++j) z(i, j) = n01(rng);
  return z;
}

Matrix generate(const DenseNet& generator, Index m, Rng& rng) {
  return predict(generator, sample_noise(m, generator.input_dim(), rng));
}

TrainResult train(TrainState state, const DataSampler& sampler, const TrainConfig& cfg,
                  const CheckpointHook& hook) {
  cfg.validate();
  const bool learned = cfg.adversary_mode == AdversaryMode::learned;
  if (learned && !state.adversary) throw InvalidInput("learned adversary mode needs an adversary network");
  if (learned && sampler.feature_dim() == 0)
    throw InvalidInput("a learned adversary needs data features, not only distances");
  if (state.generated_adversary && !state.adversary)
    throw InvalidInput("a generated-branch adversary requires a data-branch adversary");

  const DenseNet* data_adv = learned ? &*state.adversary : nullptr;
  auto gen_adv = [&]() -> const DenseNet* {
    if (!learned) return nullptr;
    return state.generated_adversary ? &*state.generated_adversary : &*state.adversary;
  };

  Rng rng(cfg.seed);
  const Index m = cfg.batch;
  const auto p = ProbabilityVector::uniform(m);
  const auto lw_mode = cfg.orth_mode == OrthMode::layerwise_offdiag ? LayerwiseMode::offdiag
                                                                     : LayerwiseMode::full;
  const bool layerwise = cfg.orth_mode == OrthMode::layerwise_full ||
                         cfg.orth_mode == OrthMode::layerwise_offdiag;

  TrainResult result;
  TrainState last_checkpoint = state;
  int last_checkpoint_iter = 0;

  for (int t = 0; t < cfg.iterations; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool frozen = cfg.freeze_after >= 0 && t >= cfg.freeze_after;
    const StepKind step = (learned && !frozen) ? adversary_schedule(t, cfg.n_g) : StepKind::generator;

    DataBatch batch = sampler.sample(m, rng);
    const Matrix z = sample_noise(m, cfg.noise_dim, rng);
    ForwardResult gen_fwd = forward(state.generator, z);
    const Matrix& y = gen_fwd.output;

    std::optional<BranchFeatures> data_branch;
    DistanceMatrix d_data;
    if (batch.features && (data_adv || !batch.distances)) {
      data_branch = embed_branch(*batch.features, data_adv);
      d_data = data_branch->distances;
    } else if (batch.distances) {
      d_data = DistanceMatrix(*batch.distances);
    } else {
      throw InvalidInput("sampler produced an empty batch");
    }
    BranchFeatures gen_branch = embed_branch(y, gen_adv());

    IterationRecord rec;
    rec.iteration = t;
    rec.step = step;

    auto abort = [&](const std::string& why) {
      throw TrainingAborted("training diverged at iteration " + std::to_string(t) + ": " + why, t,
                            last_checkpoint, last_checkpoint_iter);
    };

    NormalizedGw solved;
    try {
      solved = normalized_gw(d_data, gen_branch.distances, p, p, cfg.gw);
    } catch (const NumericalError& e) {
      abort(e.what());
    }
    rec.gw_loss = solved.raw_loss;
    rec.gw_entropic_loss = solved.loss;
    rec.marginal_violation = solved.max_marginal_violation();
    if (!std::isfinite(solved.loss) || !std::isfinite(solved.raw_loss)) abort("loss is not finite");
    if (std::abs(solved.raw_loss) > cfg.divergence_threshold) abort("loss exceeds the divergence threshold");

    if (data_branch && learned) {
      const double in_max = max_entry(pairwise_euclidean(data_branch->inputs).values());
      rec.feature_stretch = in_max > 0.0 ? max_entry(d_data.values()) / in_max : 0.0;
    } else {
      rec.feature_stretch = 1.0;
    }

    // Adversary regularizer, logged on every iteration while an adversary exists.
    BranchReg reg_data, reg_gen;
    LayerwisePenalty lw_data, lw_gen;
    if (learned) {
      if (cfg.orth_mode == OrthMode::procrustes) {
        reg_data = procrustes_branch(*data_branch, cfg.beta);
        reg_gen = procrustes_branch(gen_branch, cfg.beta);
        rec.adversary_reg = reg_data.value + reg_gen.value;
      } else if (layerwise) {
        lw_data = layerwise_orthogonality_penalty(*state.adversary, cfg.beta, lw_mode);
        rec.adversary_reg = lw_data.value;
        if (state.generated_adversary) {
          lw_gen = layerwise_orthogonality_penalty(*state.generated_adversary, cfg.beta, lw_mode);
          rec.adversary_reg += lw_gen.value;
        }
      }
    }

    if (step == StepKind::adversary) {
      // Ascent on L - R(F_x, X) - R(F_y, Y) over the adversary parameters.
      Matrix up_data = pairwise_euclidean_backward(
          data_branch->features, normalized_gw_grad_d(d_data, gen_branch.distances, solved));
      Matrix up_gen = pairwise_euclidean_backward(
          gen_branch.features, normalized_gw_grad_dbar(d_data, gen_branch.distances, solved));
      if (cfg.orth_mode == OrthMode::procrustes) {
        up_data -= reg_data.feature_grad;
        up_gen -= reg_gen.feature_grad;
      }
      GradientSet g_data = backward(*state.adversary, *data_branch->adversary_tape, up_data).grads;
      GradientSet g_gen = backward(*gen_adv(), *gen_branch.adversary_tape, up_gen).grads;
      if (layerwise) {
        lw_data.grad *= -1.0;
        g_data += lw_data.grad;
        if (state.generated_adversary) {
          lw_gen.grad *= -1.0;
          g_gen += lw_gen.grad;
        }
      }
      if (state.generated_adversary) {
        if (!g_data.all_finite() || !g_gen.all_finite()) abort("non-finite adversary gradient");
        adam_step(*state.adversary, g_data, state.adversary_opt, StepDirection::ascend);
        adam_step(*state.generated_adversary, g_gen, state.generated_adversary_opt,
                  StepDirection::ascend);
      } else {
        g_data += g_gen;
        if (!g_data.all_finite()) abort("non-finite adversary gradient");
        adam_step(*state.adversary, g_data, state.adversary_opt, StepDirection::ascend);
      }
    } else {
      Matrix gy = gw_output_gradient(d_data, gen_branch, solved, gen_adv());
      for (const auto& pen : cfg.gen_penalties) {
        if (t < pen.start_iteration) continue;
        PenaltyResult r;
        switch (pen.kind) {
          case PenaltyKind::l1: r = l1_penalty(y, pen.lambda); break;
          case PenaltyKind::tv: r = tv_penalty(y, pen.tv_height, pen.tv_width, pen.lambda); break;
          case PenaltyKind::style: r = style_penalty(*cfg.style, y, pen.lambda); break;
        }
        rec.penalties[penalty_name(pen.kind)] += r.value;
        gy += r.grad;
      }
      GradientSet g = backward(state.generator, gen_fwd.tape, gy).grads;
      if (!g.all_finite()) abort("non-finite generator gradient");
      adam_step(state.generator, g, state.generator_opt, StepDirection::descend);
    }

    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.append(std::move(rec));

    const int done = t + 1;
    if (done % cfg.checkpoint_every == 0 || done == cfg.iterations) {
      last_checkpoint = state;
      last_checkpoint_iter = done;
      if (hook) hook(done, state);
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace gwgen
