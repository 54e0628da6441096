#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "darcn/audio.hpp"
#include "darcn/audit.hpp"
#include "darcn/checkpoint.hpp"
#include "darcn/data.hpp"
#include "darcn/errors.hpp"
#include "darcn/metrics.hpp"
#include "darcn/model.hpp"
#include "darcn/stft.hpp"
#include "darcn/synth.hpp"
#include "darcn/trainer.hpp"

namespace fs = std::filesystem;
using namespace darcn;

namespace {

ArchConfig arch_for(const std::string& preset, std::size_t stages) {
  ArchConfig cfg = ArchConfig::from_preset(preset);
  if (stages > 0) cfg.stages = stages;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

int run_synth(const SynthSpec& spec) {
  synthesize_corpus(spec);
  std::printf("corpus written to %s (train %zu, val %zu, test %zu utterances)\n",
              spec.out_dir.c_str(), spec.train_count, spec.val_count, spec.test_count);
  return 0;
}

int run_train(const TrainConfig& cfg) {
  TrainResult r = train(cfg);
  if (r.history.empty()) {
    std::printf("nothing to do: checkpoint already at the epoch cap\n");
    return 0;
  }
  for (const EpochStats& e : r.history)
    std::printf("epoch %zu  lr %.3g  train %.6f  val %.6f\n", e.epoch, e.lr, e.train_loss,
                e.val_loss);
  std::printf("%s after epoch %zu; best val %.6f at epoch %zu\n",
              r.stopped_early ? "stopped" : "finished", r.history.back().epoch, r.best_val,
              r.best_epoch);
  std::printf("best weights: %s\n", r.best_path.c_str());
  std::printf("resume state: %s\n", r.last_path.c_str());
  return 0;
}

int run_enhance(const std::string& in, const std::string& out, const std::string& ckpt) {
  LoadedModel lm = load_model_checkpoint(ckpt);
  Waveform wav = read_wav(in);
  Waveform result;
  result.sample_rate = wav.sample_rate;
  result.samples = enhance_samples(*lm.model, wav.samples);
  for (double v : result.samples)
    if (!std::isfinite(v)) throw NumericError("enhance: non-finite sample in the output");
  write_wav(out, result);
  std::printf("enhanced %s -> %s (%zu samples)\n", in.c_str(), out.c_str(),
              result.samples.size());
  return 0;
}

int run_evaluate(const std::string& data, const std::string& split, const std::string& ckpt,
                 const std::string& out_dir, std::size_t threads) {
  const Manifest manifest = read_manifest((fs::path(data) / (split + ".tsv")).string());
  const auto kinds = read_kinds((fs::path(data) / "kinds.tsv").string());
  LoadedModel lm = load_model_checkpoint(ckpt);
  const StftConfig sc = lm.arch.stft();
  Enhancer enhance = [&](const std::vector<double>& x) {
    return enhance_samples(*lm.model, x);
  };
  EvalReport report = evaluate_manifest(data, manifest, kinds, enhance, sc, threads);

  fs::create_directories(out_dir);
  const std::string tsv_path = (fs::path(out_dir) / "report.tsv").string();
  const std::string json_path = (fs::path(out_dir) / "report.json").string();
  write_text(tsv_path, report.tsv());
  write_text(json_path, report.json());

  std::printf("%zu utterances scored; reports: %s %s\n", report.utterances.size(),
              tsv_path.c_str(), json_path.c_str());
  for (const char* pool : {"seen", "unseen", "all"}) {
    const EvalRow* row = report.find(pool, std::numeric_limits<double>::quiet_NaN(), "si_sdr");
    if (row)
      std::printf("si_sdr %-6s noisy %8.3f  enhanced %8.3f  delta %+.3f\n", pool,
                  row->noisy_value, row->enhanced_value, row->enhanced_value - row->noisy_value);
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t stride) {
  AuditReport report = gradient_audit(seed, stride);
  std::fputs(report.table().c_str(), stdout);
  return report.all_pass() ? 0 : 3;
}

int run_params(const ArchConfig& arch) {
  Rng rng(0);
  DarcnModel model(arch, rng);
  std::size_t total = 0;
  std::vector<LayerCount> table = model.count_parameters(&total);
  std::printf("%-14s %10s\n", "layer", "params");
  for (const LayerCount& row : table) std::printf("%-14s %10zu\n", row.name.c_str(), row.count);
  std::printf("%-14s %10zu\n", "total", total);
  std::printf("total (millions): %.2f\n", static_cast<double>(total) / 1e6);
  if (arch.feature_len == 161) std::printf("design target (millions): 1.23\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DARCN speech enhancement: recursive attention-guided denoising of magnitude "
               "spectrograms"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file ([subcommand] sections)");
  app.get_formatter()->column_width(30);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate the synthetic corpus and manifests");
  SynthSpec spec;
  synth->add_option("--out", spec.out_dir, "corpus directory")->required()->envname("DARCN_OUT");
  synth->add_option("--seed", spec.seed, "master seed")->envname("DARCN_SEED");
  synth->add_option("--train-count", spec.train_count, "training utterances");
  synth->add_option("--val-count", spec.val_count, "validation utterances");
  synth->add_option("--test-count", spec.test_count, "test utterances");
  synth->add_option("--min-seconds", spec.min_seconds, "shortest utterance");
  synth->add_option("--max-seconds", spec.max_seconds, "longest utterance");
  synth->add_option("--noise-seconds", spec.noise_seconds, "length of each noise recording");

  // train
  auto* tr = app.add_subcommand("train", "run the training loop");
  TrainConfig tcfg;
  std::string t_preset = "tiny";
  std::size_t t_stages = 0;
  std::size_t t_threads = 1;
  tr->add_option("--data", tcfg.data_dir, "corpus directory with train.tsv and val.tsv")
      ->required()
      ->envname("DARCN_DATA");
  tr->add_option("--out", tcfg.out_dir, "output directory for checkpoints and the log")
      ->required()
      ->envname("DARCN_OUT");
  tr->add_option("--preset", t_preset, "architecture preset (paper or tiny)")
      ->envname("DARCN_PRESET");
  tr->add_option("--stages", t_stages, "recursive stages (0 keeps the preset value)")
      ->envname("DARCN_STAGES");
  tr->add_option("--seed", tcfg.seed, "master seed")->envname("DARCN_SEED");
  tr->add_option("--lr", tcfg.lr, "initial learning rate");
  tr->add_option("--batch-size", tcfg.batch_size, "utterances per minibatch");
  tr->add_option("--epochs", tcfg.epoch_cap, "epoch cap");
  tr->add_option("--grad-clip", tcfg.grad_clip, "max global gradient norm (0 disables)");
  tr->add_option("--resume", tcfg.resume, "continue from a previous last.ckpt");
  tr->add_option("--threads", t_threads, "worker threads (training compute is single threaded)")
      ->envname("DARCN_THREADS");

  // enhance
  auto* enh = app.add_subcommand("enhance", "denoise one WAV file");
  std::string e_in, e_out, e_ckpt;
  enh->add_option("--in", e_in, "input WAV (mono 16 kHz PCM16)")->required();
  enh->add_option("--out", e_out, "output WAV")->required()->envname("DARCN_OUT");
  enh->add_option("--ckpt", e_ckpt, "model checkpoint")->required()->envname("DARCN_CKPT");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a manifest split with and without the model");
  std::string v_data, v_split = "test", v_ckpt, v_out;
  std::size_t v_threads = 1;
  ev->add_option("--data", v_data, "corpus directory")->required()->envname("DARCN_DATA");
  ev->add_option("--split", v_split, "manifest split to score");
  ev->add_option("--ckpt", v_ckpt, "model checkpoint")->required()->envname("DARCN_CKPT");
  ev->add_option("--out", v_out, "report directory")->required()->envname("DARCN_OUT");
  ev->add_option("--threads", v_threads, "scoring worker threads")->envname("DARCN_THREADS");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of every op");
  std::uint64_t g_seed = 1;
  std::size_t g_stride = 1;
  gc->add_option("--seed", g_seed, "audit seed")->envname("DARCN_SEED");
  gc->add_option("--stride", g_stride, "check every n-th end-to-end coordinate")
      ->check(CLI::PositiveNumber);

  // params
  auto* pa = app.add_subcommand("params", "per-layer parameter table");
  std::string p_preset = "paper";
  std::size_t p_stages = 0;
  pa->add_option("--preset", p_preset, "architecture preset (paper or tiny)")
      ->envname("DARCN_PRESET");
  pa->add_option("--stages", p_stages, "recursive stages (0 keeps the preset value)")
      ->envname("DARCN_STAGES");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(spec);
    if (tr->parsed()) {
      tcfg.arch = arch_for(t_preset, t_stages);
      (void)t_threads;  // training compute is single threaded for determinism
      return run_train(tcfg);
    }
    if (enh->parsed()) return run_enhance(e_in, e_out, e_ckpt);
    if (ev->parsed()) return run_evaluate(v_data, v_split, v_ckpt, v_out, v_threads);
    if (gc->parsed()) return run_gradcheck(g_seed, g_stride);
    if (pa->parsed()) return run_params(arch_for(p_preset, p_stages));
  } catch (const NumericError& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 3;
  } catch (const InputError& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 2;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "darcn: %s\n", e.what());
    return 2;
  }
  return 1;
}
