// SPDX-License-Identifier: Apache-2.0
// jqg: synthetic jet images, preprocessing, training and evaluation.
//
// Exit codes: 0 success, 2 usage, 3 data or format error, 4 numeric degeneracy.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "jqg/config.hpp"
#include "jqg/datastore.hpp"
#include "jqg/errors.hpp"
#include "jqg/metrics.hpp"
#include "jqg/preprocess.hpp"
#include "jqg/render.hpp"
#include "jqg/sweep.hpp"
#include "jqg/synthgen.hpp"
#include "jqg/training.hpp"

namespace fs = std::filesystem;
using namespace jqg;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kDegenerate = 4 };

std::string fixed(double v, int digits = 4) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

void print_report(const std::string& tag, const metrics::MetricReport& r) {
  std::cout << tag << " accuracy=" << fixed(r.accuracy) << " precision=" << fixed(r.precision)
            << " recall=" << fixed(r.recall) << " f1=" << fixed(r.f1) << " roc_auc=" << fixed(r.roc_auc)
            << " tp=" << r.confusion.tp << " fp=" << r.confusion.fp << " tn=" << r.confusion.tn
            << " fn=" << r.confusion.fn << (r.degenerate ? " degenerate" : "") << "\n";
}

struct Split {
  std::vector<detector::JetWindow> train, val;
};

// A directory holds train.jqg and val.jqg; a single file is split in order.
Split load_split(const fs::path& data, double val_fraction) {
  Split s;
  if (fs::is_directory(data)) {
    s.train = datastore::to_windows(datastore::read_dataset(data / "train.jqg"));
    s.val = datastore::to_windows(datastore::read_dataset(data / "val.jqg"));
  } else {
    auto all = datastore::to_windows(datastore::read_dataset(data));
    const auto n_val = static_cast<std::size_t>(static_cast<double>(all.size()) * val_fraction);
    s.val.assign(std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(n_val)),
                 std::make_move_iterator(all.end()));
    all.resize(all.size() - n_val);
    s.train = std::move(all);
  }
  if (s.train.empty() || s.val.empty()) throw FormatError("train and validation splits must be non-empty");
  return s;
}

config::ExperimentConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  config::ExperimentConfig c;
  if (!path.empty()) c = config::load_experiment(path);
  for (const auto& o : overrides) c.apply(config::parse_key_values(o));
  return c;
}

std::string run_record_csv(const training::RunRecord& rec) {
  std::string out =
      "epoch,train_loss,val_loss,accuracy,precision,recall,f1,roc_auc,head_lr,unfrozen_lr,seconds,trainable_params\n";
  for (const auto& e : rec.epochs) {
    out += std::to_string(e.epoch) + "," + fixed(e.train_loss, 6) + "," + fixed(e.val_loss, 6) + "," +
           fixed(e.val.accuracy) + "," + fixed(e.val.precision) + "," + fixed(e.val.recall) + "," +
           fixed(e.val.f1) + "," + fixed(e.val.roc_auc) + "," + std::to_string(e.head_lr) + "," +
           std::to_string(e.unfrozen_lr) + "," + fixed(e.seconds, 3) + "," + std::to_string(e.trainable_params) +
           "\n";
  }
  return out;
}

void log_epoch(const training::EpochRecord& e) {
  std::cerr << "epoch " << e.epoch << " train_loss=" << fixed(e.train_loss) << " val_loss=" << fixed(e.val_loss)
            << " val_auc=" << fixed(e.val.roc_auc) << " lr=" << e.head_lr << " trainable=" << e.trainable_params
            << " (" << fixed(e.seconds, 1) << "s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jqg: quark/gluon jet-image toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate labelled jet windows");
  std::string preset = "easy", synth_out;
  std::size_t per_class = 1000;
  std::uint64_t seed = 1;
  synth->add_option("--preset", preset, "easy|paperlike|hard")->capture_default_str();
  synth->add_option("--n", per_class, "Windows per class")->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--out", synth_out)->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Per-channel statistics of a training split");
  std::string stats_in, stats_out;
  stats->add_option("--train", stats_in)->required();
  stats->add_option("--out", stats_out)->required();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Apply the preprocessing chain to a dataset");
  std::string prep_in, prep_stats, prep_out;
  prep->add_option("--in", prep_in)->required();
  prep->add_option("--stats", prep_stats)->required();
  prep->add_option("--out", prep_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model over several seeds");
  std::string train_data, train_model, train_config, train_out = "run";
  std::size_t n_seeds = 0;
  std::vector<std::string> train_set;
  train->add_option("--data", train_data, "Directory with train.jqg/val.jqg, or one file")->required();
  train->add_option("--model", train_model, "vit|conv|hybrid2|hybrid3");
  train->add_option("--config", train_config, "key = value file");
  train->add_option("--seeds", n_seeds, "Number of seeds (1..N)");
  train->add_option("--set", train_set, "Override, e.g. --set epochs=5");
  train->add_option("--out", train_out)->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_config, eval_stats;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--config", eval_config, "Defaults to config.txt beside the checkpoint");
  eval->add_option("--stats", eval_stats, "Defaults to stats.txt beside the checkpoint");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Train once per value of one factor");
  std::string sweep_axis, sweep_values, sweep_data, sweep_config, sweep_out = "sweep";
  std::vector<std::string> sweep_set;
  sweep_cmd->add_option("--axis", sweep_axis)->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated")->required();
  sweep_cmd->add_option("--data", sweep_data)->required();
  sweep_cmd->add_option("--config", sweep_config);
  sweep_cmd->add_option("--set", sweep_set);
  sweep_cmd->add_option("--out", sweep_out)->capture_default_str();

  // render
  auto* render_cmd = app.add_subcommand("render", "Average intensity map as PGM");
  std::string render_data, render_label = "q", render_channel = "track", render_scale = "log", render_out;
  render_cmd->add_option("--data", render_data)->required();
  render_cmd->add_option("--label", render_label, "q|g")->capture_default_str();
  render_cmd->add_option("--channel", render_channel, "track|ecal|hcal")->capture_default_str();
  render_cmd->add_option("--scale", render_scale, "log|linear")->capture_default_str();
  render_cmd->add_option("--out", render_out, "Defaults to <label>_<channel>_<scale>.pgm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) {
      auto cfg = synth::SynthConfig::preset(synth::parse_separability(preset), seed);
      const auto windows = synth::generate_dataset(cfg, per_class);
      datastore::write_dataset(synth_out, datastore::from_windows(windows));
      std::cout << "wrote " << windows.size() << " windows to " << synth_out << "\n";
    } else if (*stats) {
      const auto windows = datastore::to_windows(datastore::read_dataset(stats_in));
      const auto s = preprocess::compute_channel_stats(windows);
      datastore::write_stats(stats_out, s);
      std::cout << datastore::format_stats(s);
    } else if (*prep) {
      const auto windows = datastore::to_windows(datastore::read_dataset(prep_in));
      const auto s = datastore::read_stats(prep_stats);
      const auto processed = preprocess::preprocess_all(windows, s);
      datastore::Dataset out = datastore::from_windows(windows);
      out.data.clear();
      for (const auto& p : processed) out.data.insert(out.data.end(), p.begin(), p.end());
      datastore::write_dataset(prep_out, out);
      std::cout << "wrote " << processed.size() << " preprocessed windows to " << prep_out << "\n";
    } else if (*train) {
      auto cfg = resolve_config(train_config, train_set);
      if (!train_model.empty()) cfg.model.kind = models::parse_model_kind(train_model);
      if (n_seeds > 0) {
        cfg.train.seeds.clear();
        for (std::uint64_t s = 1; s <= n_seeds; ++s) cfg.train.seeds.push_back(s);
      }
      cfg.validate();
      const Split split = load_split(train_data, cfg.val_fraction);
      const auto st = preprocess::compute_channel_stats(split.train, cfg.preproc);
      const auto train_set_full = training::make_sample_set(split.train, st, cfg.preproc);
      const auto train_samples = training::take_fraction(train_set_full, cfg.dataset_fraction);
      const auto val_samples = training::make_sample_set(split.val, st, cfg.preproc);
      const fs::path out(train_out);
      fs::create_directories(out);
      datastore::write_text(out / "config.txt", cfg.to_text());
      datastore::write_stats(out / "stats.txt", st);
      const auto result =
          training::run_experiment(train_samples, val_samples, cfg.model, cfg.train, cfg.augment, log_epoch);
      for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        const std::string tag = "seed" + std::to_string(cfg.train.seeds[i]);
        datastore::write_text(out / ("run_" + tag + ".csv"), run_record_csv(run.record));
        datastore::write_checkpoint(out / ("checkpoint_" + tag + ".jqgc"), run.checkpoint);
        print_report(tag + " best_epoch=" + std::to_string(run.record.best_epoch), run.best);
      }
      datastore::write_checkpoint(out / "checkpoint.jqgc", result.runs.front().checkpoint);
      const datastore::CsvRow row{std::string(models::to_string(cfg.model.kind)), result.aggregate, result.params,
                                  result.mean_train_seconds, result.inference_ms};
      datastore::write_metrics_csv(std::span(&row, 1), out / "metrics.csv");
      std::cout << datastore::format_metrics_csv(std::span(&row, 1));
    } else if (*eval) {
      const fs::path dir = fs::path(eval_ckpt).parent_path();
      const auto cfg = config::load_experiment(eval_config.empty() ? (dir / "config.txt").string() : eval_config);
      const auto st = datastore::read_stats(eval_stats.empty() ? dir / "stats.txt" : fs::path(eval_stats));
      models::Classifier<float> model(cfg.model, 0);
      datastore::load_checkpoint(model.registry(), datastore::read_checkpoint(eval_ckpt));
      const auto windows = datastore::to_windows(datastore::read_dataset(eval_data));
      const auto samples = training::make_sample_set(windows, st, cfg.preproc);
      const auto ev = training::evaluate(model, samples, training::path_augment(cfg.augment, cfg.model));
      auto report = ev.report;
      report.inference_ms = training::measure_inference_ms(model);
      print_report("eval loss=" + fixed(ev.loss), report);
      std::cout << "inference_ms=" << fixed(report.inference_ms) << "\n";
    } else if (*sweep_cmd) {
      auto cfg = resolve_config(sweep_config, sweep_set);
      cfg.validate();
      const auto axis = sweep::parse_axis(sweep_axis);
      std::vector<std::string> values;
      for (std::size_t pos = 0;;) {
        const auto comma = sweep_values.find(',', pos);
        values.push_back(sweep_values.substr(pos, comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      for (const auto& v : values) sweep::with_value(cfg, axis, v);
      const Split split = load_split(sweep_data, cfg.val_fraction);
      const auto st = preprocess::compute_channel_stats(split.train, cfg.preproc);
      const auto train_samples = training::make_sample_set(split.train, st, cfg.preproc);
      const auto val_samples = training::make_sample_set(split.val, st, cfg.preproc);
      const auto rows = sweep::run_sweep(cfg, axis, values, train_samples, val_samples, log_epoch);
      const auto csv = sweep::to_csv_rows(axis, rows);
      const fs::path out(sweep_out);
      fs::create_directories(out);
      datastore::write_text(out / "config.txt", cfg.to_text());
      datastore::write_metrics_csv(csv, out / "sweep.csv");
      std::cout << datastore::format_metrics_csv(csv);
    } else if (*render_cmd) {
      const auto windows = datastore::to_windows(datastore::read_dataset(render_data));
      const auto img = render::render_intensity_map(windows, render::parse_label(render_label),
                                                    render::parse_channel(render_channel),
                                                    render::parse_scale(render_scale));
      const std::string path =
          render_out.empty() ? render_label + "_" + render_channel + "_" + render_scale + ".pgm" : render_out;
      render::write_pgm(path, img);
      std::cout << "wrote " << path << "\n";
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate: " << e.what() << "\n";
    return kDegenerate;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
