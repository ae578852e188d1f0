// Command-line entry point: data synthesis, training, inference, evaluation,
// gradient checking and model description.
//
// Config precedence: built-in defaults < --preset < --config file < flags.
// Exit codes: 0 success, 1 operational error, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cit/data.hpp"
#include "cit/metrics.hpp"
#include "cit/model.hpp"
#include "cit/trainer.hpp"

namespace fs = std::filesystem;
using namespace cit;

namespace {

struct CliConfig {
  // model
  int64_t rcitg_count = 6;
  int64_t citb_count = 6;
  int64_t window = 8;
  int64_t channels = 180;
  int64_t heads = 6;
  double alpha = 0.01;
  double beta = 0.01;
  int64_t squeeze = 3;
  double mlp_ratio = 2.0;
  bool use_scam = true;
  bool use_cab = true;
  bool use_hinb = true;
  bool use_rel_bias = true;
  // training
  double lr = 1e-4;
  int64_t batch = 32;
  int64_t epochs = 15;
  int64_t max_steps = 0;
  int64_t crop = 256;
  uint64_t seed = 0;
  double lambda_col = 0.5;
  double lambda_spa = 0.5;
  bool use_col = true;
  bool use_spa = true;
  std::string spa_variant = "region";
  int64_t checkpoint_interval = 0;
  bool clip_grad = false;
  double clip_norm = 1.0;
  // synthetic data
  int64_t procedural = 8;
  int64_t size = 256;
  double detail = 1.0;
};

CITConfig model_config(const CliConfig& c) {
  CITConfig m;
  m.rcitg_count = c.rcitg_count;
  m.citb_count = c.citb_count;
  m.window = c.window;
  m.channels = c.channels;
  m.heads = c.heads;
  m.alpha = c.alpha;
  m.beta = c.beta;
  m.squeeze = c.squeeze;
  m.mlp_ratio = c.mlp_ratio;
  m.use_scam = c.use_scam;
  m.use_cab = c.use_cab;
  m.use_hinb = c.use_hinb;
  m.use_rel_bias = c.use_rel_bias;
  return m;
}

train::TrainConfig train_config(const CliConfig& c) {
  train::TrainConfig t;
  t.lr = c.lr;
  t.batch = c.batch;
  t.epochs = c.epochs;
  t.max_steps = c.max_steps;
  t.crop = c.crop;
  t.seed = c.seed;
  t.weights.lambda_col = c.lambda_col;
  t.weights.lambda_spa = c.lambda_spa;
  t.weights.use_col = c.use_col;
  t.weights.use_spa = c.use_spa;
  if (c.spa_variant == "region") {
    t.weights.spa_variant = losses::SpaVariant::region;
  } else if (c.spa_variant == "neighbor") {
    t.weights.spa_variant = losses::SpaVariant::neighbor;
  } else {
    fail(ErrorCode::Config, "spa_variant must be region or neighbor");
  }
  t.checkpoint_interval = c.checkpoint_interval;
  t.clip_grad = c.clip_grad;
  t.clip_norm = c.clip_norm;
  return t;
}

void apply_preset(CliConfig& c, const std::string& preset) {
  if (preset == "paper") {
    // the defaults above are the paper configuration
    return;
  }
  if (preset == "toy") {
    CITConfig m = CITConfig::toy();
    c.rcitg_count = m.rcitg_count;
    c.citb_count = m.citb_count;
    c.window = m.window;
    c.channels = m.channels;
    c.heads = m.heads;
    c.alpha = m.alpha;
    c.beta = m.beta;
    c.squeeze = m.squeeze;
    c.mlp_ratio = m.mlp_ratio;
    c.lr = 1e-3;
    c.batch = 4;
    c.epochs = 200;
    c.crop = 64;
    c.clip_grad = true;
    c.procedural = 4;
    c.size = 64;
    c.detail = 0.3;
    return;
  }
  throw CLI::ValidationError("--preset must be toy or paper");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, "bad config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void apply_config_file(CliConfig& c, const std::string& path) {
  auto kv = parse_config_file(path);
  auto geti = [&](const char* k, int64_t& out) {
    auto it = kv.find(k);
    if (it != kv.end()) {
      out = std::stoll(it->second);
      kv.erase(it);
    }
  };
  auto getd = [&](const char* k, double& out) {
    auto it = kv.find(k);
    if (it != kv.end()) {
      out = std::stod(it->second);
      kv.erase(it);
    }
  };
  auto getb = [&](const char* k, bool& out) {
    auto it = kv.find(k);
    if (it != kv.end()) {
      out = it->second == "1" || it->second == "true";
      kv.erase(it);
    }
  };
  auto gets = [&](const char* k, std::string& out) {
    auto it = kv.find(k);
    if (it != kv.end()) {
      out = it->second;
      kv.erase(it);
    }
  };
  geti("rcitg_count", c.rcitg_count);
  geti("citb_count", c.citb_count);
  geti("window", c.window);
  geti("channels", c.channels);
  geti("heads", c.heads);
  getd("alpha", c.alpha);
  getd("beta", c.beta);
  geti("squeeze", c.squeeze);
  getd("mlp_ratio", c.mlp_ratio);
  getb("use_scam", c.use_scam);
  getb("use_cab", c.use_cab);
  getb("use_hinb", c.use_hinb);
  getb("use_rel_bias", c.use_rel_bias);
  getd("lr", c.lr);
  geti("batch", c.batch);
  geti("epochs", c.epochs);
  geti("max_steps", c.max_steps);
  geti("crop", c.crop);
  {
    auto it = kv.find("seed");
    if (it != kv.end()) {
      c.seed = std::stoull(it->second);
      kv.erase(it);
    }
  }
  getd("lambda_col", c.lambda_col);
  getd("lambda_spa", c.lambda_spa);
  getb("use_col", c.use_col);
  getb("use_spa", c.use_spa);
  gets("spa_variant", c.spa_variant);
  geti("checkpoint_interval", c.checkpoint_interval);
  getb("clip_grad", c.clip_grad);
  getd("clip_norm", c.clip_norm);
  geti("procedural", c.procedural);
  geti("size", c.size);
  getd("detail", c.detail);
  if (!kv.empty()) {
    throw CLI::ValidationError("unknown config key: " + kv.begin()->first);
  }
}

std::string resolved_text(const CliConfig& c) {
  std::ostringstream os;
  os << "rcitg_count=" << c.rcitg_count << "\ncitb_count=" << c.citb_count
     << "\nwindow=" << c.window << "\nchannels=" << c.channels << "\nheads=" << c.heads
     << "\nalpha=" << c.alpha << "\nbeta=" << c.beta << "\nsqueeze=" << c.squeeze
     << "\nmlp_ratio=" << c.mlp_ratio << "\nuse_scam=" << c.use_scam
     << "\nuse_cab=" << c.use_cab << "\nuse_hinb=" << c.use_hinb
     << "\nuse_rel_bias=" << c.use_rel_bias << "\nlr=" << c.lr << "\nbatch=" << c.batch
     << "\nepochs=" << c.epochs << "\nmax_steps=" << c.max_steps << "\ncrop=" << c.crop
     << "\nseed=" << c.seed << "\nlambda_col=" << c.lambda_col
     << "\nlambda_spa=" << c.lambda_spa << "\nuse_col=" << c.use_col
     << "\nuse_spa=" << c.use_spa << "\nspa_variant=" << c.spa_variant
     << "\ncheckpoint_interval=" << c.checkpoint_interval << "\nclip_grad=" << c.clip_grad
     << "\nclip_norm=" << c.clip_norm << "\nprocedural=" << c.procedural
     << "\nsize=" << c.size << "\ndetail=" << c.detail << "\n";
  return os.str();
}

void print_resolved(const CliConfig& c) {
  std::cout << "-- resolved config --\n" << resolved_text(c) << "--\n";
}

// model flags can be rebuilt from a checkpoint's stored config snapshot
CITConfig config_from_snapshot(const std::string& text) {
  CITConfig m;
  std::istringstream in(text);
  std::string line;
  auto pick = [&](const std::string& k, const std::string& v) {
    if (k == "rcitg_count") m.rcitg_count = std::stoll(v);
    if (k == "citb_count") m.citb_count = std::stoll(v);
    if (k == "window") m.window = std::stoll(v);
    if (k == "channels") m.channels = std::stoll(v);
    if (k == "heads") m.heads = std::stoll(v);
    if (k == "alpha") m.alpha = std::stod(v);
    if (k == "beta") m.beta = std::stod(v);
    if (k == "squeeze") m.squeeze = std::stoll(v);
    if (k == "mlp_ratio") m.mlp_ratio = std::stod(v);
    if (k == "use_scam") m.use_scam = v == "1" || v == "true";
    if (k == "use_cab") m.use_cab = v == "1" || v == "true";
    if (k == "use_hinb") m.use_hinb = v == "1" || v == "true";
    if (k == "use_rel_bias") m.use_rel_bias = v == "1" || v == "true";
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) pick(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

data::PairedImages gather_pairs(const CliConfig& c, const std::string& data_dir) {
  if (!data_dir.empty()) return data::load_pair_tree(data_dir);
  data::ExposurePairSpec spec;
  spec.seed = c.seed;
  return data::make_procedural_pairs(c.procedural, c.size, c.size, spec, c.detail);
}

std::vector<std::string> list_ppm(const std::string& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, dir + " is not a directory");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") {
      names.push_back(e.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) fail(ErrorCode::IoError, "no .ppm files in " + dir);
  return names;
}

int cmd_synth_data(const CliConfig& c, const std::string& input_dir, const std::string& out_dir) {
  print_resolved(c);
  data::ExposurePairSpec spec;
  spec.seed = c.seed;
  std::vector<ImageRGB> gts;
  std::vector<std::string> stems;
  if (!input_dir.empty()) {
    for (const auto& name : list_ppm(input_dir)) {
      gts.push_back(load_image((fs::path(input_dir) / name).string()));
      stems.push_back(fs::path(name).stem().string());
    }
  } else {
    for (int64_t i = 0; i < c.procedural; ++i) {
      gts.push_back(data::make_procedural(c.size, c.size, mix_seed(c.seed, 1000 + i), c.detail));
      char buf[32];
      std::snprintf(buf, sizeof(buf), "proc_%03d", static_cast<int>(i));
      stems.push_back(buf);
    }
  }
  data::write_pair_tree(out_dir, gts, stems, spec);
  std::cout << "wrote " << gts.size() * spec.ev_offsets.size() << " pairs under " << out_dir
            << "\n";
  return 0;
}

int cmd_train(const CliConfig& c, const std::string& data_dir, const std::string& out_dir,
              const std::string& resume) {
  print_resolved(c);
  CITModel<float> model;
  model.init(model_config(c), c.seed);
  auto pairs = gather_pairs(c, data_dir);
  std::cout << "training on " << pairs.size() << " pairs\n";
  auto result = train::train(model, pairs, train_config(c), out_dir, resume);
  if (!result.log.empty()) {
    std::cout << "final step " << result.final_step << " loss " << result.final_total << "\n";
  }
  std::cout << "checkpoints and loss log under " << out_dir << "\n";
  return 0;
}

int cmd_infer(const CliConfig& c, const std::string& ckpt, const std::string& input_dir,
              const std::string& out_dir) {
  print_resolved(c);
  auto data = train::load_checkpoint(ckpt);
  CITModel<float> model;
  model.init(config_from_snapshot(data.config_text), 0);
  train::restore_model(model, data);
  fs::create_directories(out_dir);
  for (const auto& name : list_ppm(input_dir)) {
    ImageRGB img = load_image((fs::path(input_dir) / name).string());
    Tensor<float> in = stack_images({img});
    Tensor<float> out = model.forward(in, false);
    ImageRGB corrected = chw_to_image(reshape(out, {3, img.height, img.width}));
    save_image(corrected, (fs::path(out_dir) / name).string());
  }
  std::cout << "corrected images written to " << out_dir << "\n";
  return 0;
}

int cmd_eval(const CliConfig& c, const std::string& pred_dir, const std::string& ref_dir,
             const std::string& csv, const std::string& ssim_mode) {
  print_resolved(c);
  const auto names = list_ppm(pred_dir);
  std::vector<ImageRGB> preds, refs;
  for (const auto& name : names) {
    preds.push_back(load_image((fs::path(pred_dir) / name).string()));
    const fs::path ref_path = fs::path(ref_dir) / name;
    if (!fs::exists(ref_path)) fail(ErrorCode::IoError, "missing reference for " + name);
    refs.push_back(load_image(ref_path.string()));
  }
  const auto mode =
      ssim_mode == "luma" ? metrics::SsimMode::luma : metrics::SsimMode::rgb_mean;
  auto report = metrics::evaluate_pairs(preds, refs, names, mode);
  std::cout << metrics::report_text(report);
  if (!csv.empty()) {
    metrics::write_report_csv(report, csv);
    std::cout << "csv written to " << csv << "\n";
  }
  return 0;
}

int cmd_gradcheck(const CliConfig& c, int64_t samples, double tol, double loss_tol) {
  print_resolved(c);
  std::cout << "model gradient check (float64, toy config)\n";
  auto rep = train::gradcheck_model(c.seed, samples);
  std::cout << rep.text(tol);
  std::cout << "loss gradient check (float64)\n";
  auto lrep = train::gradcheck_losses(c.seed, 4 * samples);
  std::cout << lrep.text(loss_tol);
  const bool ok = rep.passed(tol) && lrep.passed(loss_tol);
  std::cout << (ok ? "GRADCHECK PASS\n" : "GRADCHECK FAIL\n");
  return ok ? 0 : 1;
}

int cmd_describe(const CliConfig& c) {
  print_resolved(c);
  CITModel<float> model;
  model.init(model_config(c), c.seed);
  std::cout << model.describe();

  for (const char* preset : {"toy", "paper"}) {
    CliConfig p;
    apply_preset(p, preset);
    std::cout << "\n-- preset " << preset << " --\n" << resolved_text(p);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windowed-attention exposure correction toolkit"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::string preset, config_file;

  // shared model/training options, registered on each subcommand
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--preset", preset, "toy or paper");
    sub->add_option("--config", config_file, "key=value config file");
    sub->add_option("--rcitg-count", cfg.rcitg_count);
    sub->add_option("--citb-count", cfg.citb_count);
    sub->add_option("--window", cfg.window);
    sub->add_option("--channels", cfg.channels);
    sub->add_option("--heads", cfg.heads);
    sub->add_option("--alpha", cfg.alpha);
    sub->add_option("--beta", cfg.beta);
    sub->add_option("--squeeze", cfg.squeeze);
    sub->add_option("--mlp-ratio", cfg.mlp_ratio);
    sub->add_flag("--use-scam,!--no-scam", cfg.use_scam);
    sub->add_flag("--use-cab,!--no-cab", cfg.use_cab);
    sub->add_flag("--use-hinb,!--no-hinb", cfg.use_hinb);
    sub->add_flag("--use-rel-bias,!--no-rel-bias", cfg.use_rel_bias);
    sub->add_option("--lr", cfg.lr);
    sub->add_option("--batch", cfg.batch);
    sub->add_option("--epochs", cfg.epochs);
    sub->add_option("--max-steps", cfg.max_steps);
    sub->add_option("--crop", cfg.crop);
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--lambda-col", cfg.lambda_col);
    sub->add_option("--lambda-spa", cfg.lambda_spa);
    sub->add_flag("--use-col,!--no-col", cfg.use_col);
    sub->add_flag("--use-spa,!--no-spa", cfg.use_spa);
    sub->add_option("--spa-variant", cfg.spa_variant, "region or neighbor");
    sub->add_option("--checkpoint-interval", cfg.checkpoint_interval);
    sub->add_flag("--clip-grad,!--no-clip-grad", cfg.clip_grad);
    sub->add_option("--clip-norm", cfg.clip_norm);
    sub->add_option("--procedural", cfg.procedural, "procedural ground-truth count");
    sub->add_option("--size", cfg.size, "procedural image size");
    sub->add_option("--detail", cfg.detail, "procedural detail in [0,1]");
  };

  std::string input_dir, out_dir, data_dir, resume, ckpt, pred_dir, ref_dir, csv;
  std::string ssim_mode = "rgb";
  int64_t gc_samples = 8;
  double gc_tol = 1e-3, gc_loss_tol = 1e-5;

  auto* synth = app.add_subcommand("synth-data", "render exposure pairs to a directory tree");
  add_common(synth);
  synth->add_option("--input", input_dir, "directory of well-exposed .ppm images");
  synth->add_option("--out", out_dir, "output tree root")->required();

  auto* tr = app.add_subcommand("train", "optimize a model");
  add_common(tr);
  tr->add_option("--data", data_dir, "pair tree from synth-data (else procedural)");
  tr->add_option("--out", out_dir, "checkpoint/log directory")->default_val("runs/train");
  tr->add_option("--resume", resume, "checkpoint to continue from");

  auto* inf = app.add_subcommand("infer", "run a checkpoint over a directory");
  add_common(inf);
  inf->add_option("--ckpt", ckpt)->required();
  inf->add_option("--input", input_dir)->required();
  inf->add_option("--out", out_dir)->required();

  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of prediction dir against reference dir");
  add_common(ev);
  ev->add_option("--pred", pred_dir)->required();
  ev->add_option("--ref", ref_dir)->required();
  ev->add_option("--csv", csv, "write per-image rows to this file");
  ev->add_option("--ssim-mode", ssim_mode, "rgb or luma");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient oracle");
  add_common(gc);
  gc->add_option("--samples", gc_samples, "samples per parameter group");
  gc->add_option("--tolerance", gc_tol);
  gc->add_option("--loss-tolerance", gc_loss_tol);

  auto* desc = app.add_subcommand("describe", "layer table and preset dumps");
  add_common(desc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    // precedence: defaults < preset < file < flags; flags were already parsed
    // into cfg, so re-apply them over the preset/file by re-parsing
    if (!preset.empty() || !config_file.empty()) {
      CliConfig layered;
      if (!preset.empty()) apply_preset(layered, preset);
      if (!config_file.empty()) apply_config_file(layered, config_file);
      cfg = layered;
      try {
        app.clear();
        app.parse(argc, argv);
      } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
      }
    }

    if (synth->parsed()) return cmd_synth_data(cfg, input_dir, out_dir);
    if (tr->parsed()) return cmd_train(cfg, data_dir, out_dir, resume);
    if (inf->parsed()) return cmd_infer(cfg, ckpt, input_dir, out_dir);
    if (ev->parsed()) return cmd_eval(cfg, pred_dir, ref_dir, csv, ssim_mode);
    if (gc->parsed()) return cmd_gradcheck(cfg, gc_samples, gc_tol, gc_loss_tol);
    if (desc->parsed()) return cmd_describe(cfg);
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
