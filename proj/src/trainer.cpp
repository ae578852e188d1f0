#include "cit/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cit::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (lr <= 0) fail(ErrorCode::Config, "learning rate must be > 0");
  if (batch < 1) fail(ErrorCode::Config, "batch must be >= 1");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    fail(ErrorCode::Config, "Adam betas must lie in [0,1)");
  }
  if (eps <= 0) fail(ErrorCode::Config, "Adam eps must be > 0");
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state,
               const TrainConfig& cfg, bool require_grads) {
  state.t += 1;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  const T corr1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
  const T corr2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));

  T clip_scale = T(1);
  if (cfg.clip_grad) {
    double sq = 0.0;
    for (auto& [name, p] : params) {
      const T* g = p.grad_data();
      if (!g) continue;
      for (int64_t i = 0; i < p.numel(); ++i) sq += static_cast<double>(g[i]) * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) clip_scale = static_cast<T>(cfg.clip_norm / norm);
  }

  for (auto& [name, p] : params) {
    const T* g = p.grad_data();
    if (!g && require_grads) {
      fail(ErrorCode::MissingGrad, "parameter " + name + " has no gradient");
    }
    auto it = state.moments.find(name);
    if (it == state.moments.end()) {
      it = state.moments
               .emplace(name, std::make_pair(Tensor<T>::zeros(p.shape()),
                                             Tensor<T>::zeros(p.shape())))
               .first;
    }
    Tensor<T>& m = it->second.first;
    Tensor<T>& v = it->second.second;
    if (m.shape() != p.shape()) {
      fail(ErrorCode::ShapeMismatch, "optimizer state for " + name + " has wrong shape");
    }
    T* md = m.data();
    T* vd = v.data();
    T* pd = p.data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      const T gi = g ? g[i] * clip_scale : T(0);
      md[i] = b1 * md[i] + (T(1) - b1) * gi;
      vd[i] = b2 * vd[i] + (T(1) - b2) * gi * gi;
      const T mhat = md[i] / corr1;
      const T vhat = vd[i] / corr2;
      pd[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'I', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void require_little_endian() {
  if (std::endian::native != std::endian::little) {
    fail(ErrorCode::UnsupportedFormat, "checkpoint format is little-endian only");
  }
}

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_named_tensor(std::ostream& out, const std::string& name, const Tensor<float>& t) {
  write_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(0));  // dtype tag: 0 = float32
  write_u32(out, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    const int64_t d = t.dim(i);
    out.write(reinterpret_cast<const char*>(&d), 8);
  }
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(float))));
}

}  // namespace

void save_checkpoint(const std::string& path, CITModel<float>& model,
                     const AdamState<float>* opt, int64_t step, const std::string& cfg_text) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write checkpoint " + path);
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u64(out, static_cast<uint64_t>(step));
  write_u32(out, static_cast<uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  uint32_t count = 0;
  model.visit_params([&](const std::string&, Tensor<float>&) { ++count; });
  if (opt) count += 2 * static_cast<uint32_t>(opt->moments.size());
  write_u32(out, count);

  model.visit_params(
      [&](const std::string& name, Tensor<float>& t) { write_named_tensor(out, name, t); });
  if (opt) {
    for (const auto& [name, mv] : opt->moments) {
      write_named_tensor(out, "opt.m:" + name, mv.first);
      write_named_tensor(out, "opt.v:" + name, mv.second);
    }
  }
  if (!out) fail(ErrorCode::IoError, "short write to checkpoint " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    fail(ErrorCode::UnsupportedFormat, path + " is not a checkpoint file");
  }
  const uint32_t version = read_u32(in);
  if (version != kVersion) {
    fail(ErrorCode::UnsupportedFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData ck;
  ck.step = static_cast<int64_t>(read_u64(in));
  const uint32_t cfg_len = read_u32(in);
  ck.config_text.resize(cfg_len);
  in.read(ck.config_text.data(), cfg_len);
  const uint32_t count = read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int dtype = in.get();
    if (dtype != 0) fail(ErrorCode::UnsupportedFormat, "unknown dtype tag in checkpoint");
    const uint32_t rank = read_u32(in);
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      int64_t e = 0;
      in.read(reinterpret_cast<char*>(&e), 8);
      shape[d] = e;
    }
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(float))));
    if (!in) fail(ErrorCode::IoError, "truncated checkpoint " + path);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void restore_model(CITModel<float>& model, const CheckpointData& ck) {
  model.visit_params([&](const std::string& name, Tensor<float>& t) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) {
      fail(ErrorCode::Config, "checkpoint is missing parameter " + name);
    }
    if (it->second.shape() != t.shape()) {
      fail(ErrorCode::ShapeMismatch, "checkpoint parameter " + name + " has shape " +
                                         shape_str(it->second.shape()) + ", expected " +
                                         shape_str(t.shape()));
    }
    std::memcpy(t.data(), it->second.data(),
                static_cast<size_t>(t.numel()) * sizeof(float));
  });
}

void restore_adam(AdamState<float>& opt, const CheckpointData& ck) {
  opt.moments.clear();
  opt.t = ck.step;
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("opt.m:", 0) == 0) {
      const std::string pname = name.substr(6);
      auto vit = ck.tensors.find("opt.v:" + pname);
      if (vit == ck.tensors.end()) {
        fail(ErrorCode::Config, "checkpoint has m but no v for " + pname);
      }
      opt.moments.emplace(pname, std::make_pair(t.clone(), vit->second.clone()));
    }
  }
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

std::string config_text(const CITConfig& mc, const TrainConfig& tc) {
  std::ostringstream os;
  os << "rcitg_count=" << mc.rcitg_count << "\n";
  os << "citb_count=" << mc.citb_count << "\n";
  os << "window=" << mc.window << "\n";
  os << "channels=" << mc.channels << "\n";
  os << "heads=" << mc.heads << "\n";
  os << "alpha=" << mc.alpha << "\n";
  os << "beta=" << mc.beta << "\n";
  os << "squeeze=" << mc.squeeze << "\n";
  os << "mlp_ratio=" << mc.mlp_ratio << "\n";
  os << "use_scam=" << (mc.use_scam ? 1 : 0) << "\n";
  os << "use_cab=" << (mc.use_cab ? 1 : 0) << "\n";
  os << "use_hinb=" << (mc.use_hinb ? 1 : 0) << "\n";
  os << "use_rel_bias=" << (mc.use_rel_bias ? 1 : 0) << "\n";
  os << "lr=" << tc.lr << "\n";
  os << "batch=" << tc.batch << "\n";
  os << "epochs=" << tc.epochs << "\n";
  os << "max_steps=" << tc.max_steps << "\n";
  os << "crop=" << tc.crop << "\n";
  os << "seed=" << tc.seed << "\n";
  os << "lambda_col=" << tc.weights.lambda_col << "\n";
  os << "lambda_spa=" << tc.weights.lambda_spa << "\n";
  return os.str();
}

TrainResult train(CITModel<float>& model, const data::PairedImages& pairs, const TrainConfig& cfg,
                  const std::string& out_dir, const std::string& resume_from) {
  cfg.validate();
  if (cfg.crop % (4 * model.cfg.window) != 0) {
    fail(ErrorCode::Config, "crop " + std::to_string(cfg.crop) +
                                " must be divisible by 4*window=" +
                                std::to_string(4 * model.cfg.window));
  }
  data::PatchSampler sampler(&pairs, cfg.crop, cfg.batch, cfg.seed);

  AdamState<float> opt;
  int64_t start_step = 0;
  if (!resume_from.empty()) {
    CheckpointData ck = load_checkpoint(resume_from);
    restore_model(model, ck);
    restore_adam(opt, ck);
    start_step = ck.step;
  }

  int64_t total_steps = cfg.epochs * sampler.steps_per_epoch();
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);

  std::ofstream log_file;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const std::string log_path = out_dir + "/loss_log.csv";
    const bool append = start_step > 0 && fs::exists(log_path);
    log_file.open(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log_file) fail(ErrorCode::IoError, "cannot write " + log_path);
    if (!append) log_file << "step,loss_total,loss_rec,loss_col,loss_spa\n";
  }

  const std::string cfg_txt = config_text(model.cfg, cfg);
  auto params = model.named_params();
  TrainResult result;

  for (int64_t step = start_step; step < total_steps; ++step) {
    auto [ie, gt] = sampler.batch_at(static_cast<uint64_t>(step));
    losses::LossTerms<float> lt;
    Tape<float> tape;
    {
      TapeScope<float> scope(tape);
      Tensor<float> out = model.forward(ie, true);
      lt = losses::total_loss(out, gt, ie, cfg.weights);
      const double total = static_cast<double>(lt.total.item());
      if (!std::isfinite(total)) {
        fail(ErrorCode::NonFiniteLoss,
             "step " + std::to_string(step + 1) + ": loss became non-finite (rec=" +
                 std::to_string(lt.rec.item()) + ")");
      }
      model.zero_grads();
      tape.backward(lt.total);
    }
    adam_step(params, opt, cfg);

    TrainResult::Row row;
    row.step = step + 1;
    row.total = static_cast<double>(lt.total.item());
    row.rec = static_cast<double>(lt.rec.item());
    row.col = lt.col.defined() ? static_cast<double>(lt.col.item()) : 0.0;
    row.spa = lt.spa.defined() ? static_cast<double>(lt.spa.item()) : 0.0;
    result.log.push_back(row);
    if (log_file.is_open()) {
      log_file << row.step << "," << row.total << "," << row.rec << "," << row.col << ","
               << row.spa << "\n";
    }
    if (!out_dir.empty() && cfg.checkpoint_interval > 0 &&
        (step + 1) % cfg.checkpoint_interval == 0) {
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(step + 1) + ".ckpt", model, &opt,
                      step + 1, cfg_txt);
    }
  }

  result.final_step = total_steps;
  result.final_total = result.log.empty() ? 0.0 : result.log.back().total;
  if (!out_dir.empty()) {
    save_checkpoint(out_dir + "/ckpt_final.ckpt", model, &opt, total_steps, cfg_txt);
  }
  return result;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

std::string GradCheckReport::text(double tol) const {
  std::ostringstream os;
  for (const auto& g : groups) {
    os << (g.max_rel_err < tol ? "pass" : "FAIL") << "  " << g.name
       << "  max_rel_err=" << g.max_rel_err << "  (" << g.samples << " samples)\n";
  }
  os << (passed(tol) ? "PASS" : "FAIL") << "  worst=" << worst << "  tolerance=" << tol << "\n";
  return os.str();
}

GradCheckReport gradcheck_fn(const std::function<Tensor<double>()>& fn,
                             const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                             int64_t samples_per_leaf, double h, uint64_t seed) {
  for (const auto& [name, leaf] : leaves) {
    Tensor<double> l = leaf;
    l.drop_grad();
  }
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = fn();
    tape.backward(loss);
  }

  GradCheckReport report;
  Rng rng(mix_seed(seed, 0xfd));
  for (const auto& [name, leaf] : leaves) {
    Tensor<double> l = leaf;
    GradGroupReport group;
    group.name = name;
    const int64_t n = l.numel();
    std::vector<int64_t> idx;
    if (n <= samples_per_leaf) {
      for (int64_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int64_t i = 0; i < samples_per_leaf; ++i) idx.push_back(rng.uniform_int(n));
    }
    double* d = l.data();
    const double* g = l.grad_data();
    for (int64_t i : idx) {
      const double orig = d[i];
      d[i] = orig + h;
      const double fp = fn().item();
      d[i] = orig - h;
      const double fm = fn().item();
      d[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = g ? g[i] : 0.0;
      const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      group.max_rel_err = std::max(group.max_rel_err, rel);
    }
    group.samples = static_cast<int64_t>(idx.size());
    report.worst = std::max(report.worst, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

CITConfig gradcheck_config() {
  CITConfig c;
  c.rcitg_count = 1;
  c.citb_count = 2;
  c.window = 4;
  c.channels = 8;
  c.heads = 2;
  c.alpha = 0.1;
  c.beta = 0.1;
  return c;
}

GradCheckReport gradcheck_model(uint64_t seed, int64_t samples_per_group) {
  CITConfig cfg = gradcheck_config();
  CITModel<double> model;
  model.init(cfg, seed);
  Rng rng(mix_seed(seed, 0xab));
  Tensor<double> ie = Tensor<double>::uniform({1, 3, 16, 16}, rng, 0.05, 0.95);
  Tensor<double> gt = Tensor<double>::uniform({1, 3, 16, 16}, rng, 0.05, 0.95);
  losses::LossWeights w;
  auto fn = [&]() { return losses::total_loss(model.forward(ie, true), gt, ie, w).total; };
  return gradcheck_fn(fn, model.named_params(), samples_per_group, 1e-5, seed);
}

GradCheckReport gradcheck_losses(uint64_t seed, int64_t samples) {
  Rng rng(mix_seed(seed, 0xcd));
  Tensor<double> we = Tensor<double>::uniform({2, 3, 16, 16}, rng, 0.05, 0.95);
  Tensor<double> gt = Tensor<double>::uniform({2, 3, 16, 16}, rng, 0.05, 0.95);
  Tensor<double> ie = Tensor<double>::uniform({2, 3, 16, 16}, rng, 0.05, 0.95);
  we.set_requires_grad(true);
  losses::LossWeights w;
  auto fn = [&]() { return losses::total_loss(we, gt, ie, w).total; };
  return gradcheck_fn(fn, {{"I_WE", we}}, samples, 1e-5, seed);
}

template void adam_step<float>(std::vector<std::pair<std::string, Tensor<float>>>&,
                               AdamState<float>&, const TrainConfig&, bool);
template void adam_step<double>(std::vector<std::pair<std::string, Tensor<double>>>&,
                                AdamState<double>&, const TrainConfig&, bool);

}  // namespace cit::train
