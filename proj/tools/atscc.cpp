// Command-line entry point: one binary, one subcommand per pipeline stage.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "atscc/encoder.hpp"
#include "atscc/evaluation.hpp"
#include "atscc/features.hpp"
#include "atscc/io.hpp"
#include "atscc/preprocess.hpp"
#include "atscc/segmentation.hpp"
#include "atscc/synth.hpp"
#include "atscc/train.hpp"

#ifndef ATSCC_VERSION
#define ATSCC_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace atscc;

namespace {

struct Globals {
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::json config = nlohmann::json::object();
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_manifest(const Manifest& m, const CLI::App& app, const Globals& g, double wall_s) {
  nlohmann::json j;
  j["command"] = m.command;
  j["version"] = ATSCC_VERSION;
  j["seed"] = g.seed;
  j["threads"] = g.threads;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["config"] = m.config;
  j["options"] = app.config_to_str(true, false);
  j["wall_time_s"] = wall_s;
  for (const auto& out : m.outputs) {
    std::ofstream f(out + ".manifest.json");
    if (!f) throw std::runtime_error("cannot write manifest next to " + out);
    f << j.dump(2) << "\n";
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " not found: " + path);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad number in list: '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::size_t class_count(std::span<const int> labels) {
  return std::set<int>(labels.begin(), labels.end()).size();
}

std::vector<int> require_labels(const Dataset& data, const std::string& what) {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!data.label(i)) throw std::runtime_error(what + " has unlabeled instance '" + data.id(i) + "'");
  return data.labels_or(-1);
}

// 9 raw features of each instance's final timestep, the no-learning
// reference representation.
eval::Matrix final_state_features(const Dataset& data) {
  eval::Matrix out(data.size(), 9);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto f = features::assemble_features(data.trajectory(i), features::FeatureSelector::all());
    auto last = f.row(f.rows - 1);
    std::copy(last.begin(), last.end(), out.row(i).begin());
  }
  return out;
}

struct TrainOptions {
  std::string preset = "desk";
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double tau = 0.1;
  std::size_t patience = 20;
  std::string features = "all";
  std::string variant = "modified";
  double mask_prob = 0.2;
  double attn_dropout = 0.35;
  bool no_token_l2 = false;
  bool no_repr_l2 = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Encoder size: desk or large")->check(CLI::IsMember({"desk", "large"}));
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--batch-size", batch_size, "Instances per batch");
    cmd->add_option("--lr", lr, "AdamW learning rate");
    cmd->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay");
    cmd->add_option("--tau", tau, "Loss temperature");
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs (0 disables)");
    cmd->add_option("--features", features, "Feature groups: all or pos/path/polar joined by '+'");
    cmd->add_option("--variant", variant, "Loss variant: modified or rearranged")
        ->check(CLI::IsMember({"modified", "rearranged"}));
    cmd->add_option("--mask-prob", mask_prob, "Random timestep masking probability (0 disables)");
    cmd->add_option("--attn-dropout", attn_dropout, "Attention dropout rate");
    cmd->add_flag("--no-token-l2", no_token_l2, "Disable token L2 normalisation");
    cmd->add_flag("--no-repr-l2", no_repr_l2, "Disable representation L2 normalisation");
  }

  encoder::EncoderConfig encoder_config() const {
    auto sel = features::FeatureSelector::parse(features);
    auto c = preset == "large" ? encoder::EncoderConfig::large(sel.width()) : encoder::EncoderConfig::desk(sel.width());
    c.mask_prob = mask_prob;
    c.attn_dropout = attn_dropout;
    c.token_l2 = !no_token_l2;
    c.repr_l2 = !no_repr_l2;
    c.validate();
    return c;
  }

  train::TrainConfig train_config(std::uint64_t seed) const {
    train::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.lr = lr;
    c.weight_decay = weight_decay;
    c.tau = tau;
    c.patience = patience;
    c.seed = seed;
    c.features = features::FeatureSelector::parse(features);
    c.variant = loss::parse_variant(variant);
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    return {{"preset", preset},         {"epochs", epochs},       {"batch_size", batch_size},
            {"lr", lr},                 {"weight_decay", weight_decay}, {"tau", tau},
            {"patience", patience},     {"features", features},   {"variant", variant},
            {"mask_prob", mask_prob},   {"attn_dropout", attn_dropout}, {"token_l2", !no_token_l2},
            {"repr_l2", !no_repr_l2}};
  }
};

std::string kv_get(const io::KeyValues& kv, const std::string& key, const std::string& fallback) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return fallback;
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  auto logger = spdlog::stderr_color_mt("atscc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%l: %v");

  CLI::App app{"Trajectory segmentation, contrastive encoder training and evaluation"};
  app.set_version_flag("--version", std::string(ATSCC_VERSION));
  app.set_config("--config", "", "Read option values from an INI/TOML file");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  Manifest manifest;
  std::function<void()> action;

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Raw surveillance CSV -> processed dataset");
  std::string pre_in, pre_out, pre_cfg;
  preprocess::PreprocessConfig pcfg;
  std::string direction = "arrival";
  pre->add_option("-i,--input", pre_in, "Raw records CSV")->required();
  pre->add_option("-o,--output", pre_out, "Output dataset")->required();
  pre->add_option("--pipeline-config", pre_cfg, "key = value file (ref_lat, ref_lon, ref_alt_m, r_max_m, ...)");
  pre->add_option("--ref-lat", pcfg.frame.ref_lat_deg, "Airport reference latitude (deg)");
  pre->add_option("--ref-lon", pcfg.frame.ref_lon_deg, "Airport reference longitude (deg)");
  pre->add_option("--ref-alt", pcfg.frame.ref_alt_m, "Airport reference altitude (m)");
  pre->add_option("--r-max", pcfg.frame.r_max_m, "Bounding radius (m)");
  pre->add_option("--direction", direction, "arrival or departure")->check(CLI::IsMember({"arrival", "departure"}));
  pre->add_option("--downsample", pcfg.downsample_s, "Keep every n-th 1 Hz sample");
  pre->callback([&] {
    action = [&] {
      require_file(pre_in, "input");
      if (!pre_cfg.empty()) {
        require_file(pre_cfg, "pipeline config");
        pcfg = preprocess::config_from_key_values(io::read_key_values(pre_cfg));
      } else {
        pcfg.direction = direction == "arrival" ? preprocess::Direction::arrival : preprocess::Direction::departure;
      }
      pcfg.threads = g.threads;
      auto records = io::read_records_csv(pre_in);
      preprocess::PipelineReport report;
      auto data = preprocess::preprocess_pipeline(records, pcfg, &report);
      io::write_dataset(pre_out, data);
      spdlog::info("{} flights kept, {} dropped", data.size(), report.dropped.size());
      manifest = {"preprocess", {pre_in}, {pre_out}, {}};
      for (const auto& [k, v] : data.meta().entries()) manifest.config[k] = v;
    };
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Generate the labeled synthetic airport scenario");
  std::string syn_dir, syn_scenario;
  std::size_t syn_per_class = 0;
  double syn_noise_h = -1, syn_noise_v = -1;
  syn->add_option("-o,--out-dir", syn_dir, "Directory for train.atsc and test.atsc")->required();
  syn->add_option("--scenario", syn_scenario, "Scenario file (default: built-in 4-class scenario)");
  syn->add_option("--per-class", syn_per_class, "Flights per class in each split");
  syn->add_option("--noise-h", syn_noise_h, "Horizontal noise std (m)");
  syn->add_option("--noise-v", syn_noise_v, "Vertical noise std (m)");
  syn->callback([&] {
    action = [&] {
      synth::Scenario sc = synth::default_scenario();
      if (!syn_scenario.empty()) {
        require_file(syn_scenario, "scenario");
        sc = synth::read_scenario(syn_scenario);
      }
      if (syn_per_class > 0) sc.options.per_class = syn_per_class;
      if (syn_noise_h >= 0) sc.options.noise_h_m = syn_noise_h;
      if (syn_noise_v >= 0) sc.options.noise_v_m = syn_noise_v;
      sc.options.seed = g.seed;
      fs::create_directories(syn_dir);
      auto [tr, te] = synth::make_train_test(sc);
      const std::string tr_path = (fs::path(syn_dir) / "train.atsc").string();
      const std::string te_path = (fs::path(syn_dir) / "test.atsc").string();
      io::write_dataset(tr_path, tr);
      io::write_dataset(te_path, te);
      spdlog::info("wrote {} train and {} test trajectories", tr.size(), te.size());
      manifest = {"synth", {}, {tr_path, te_path}, {}};
      if (!syn_scenario.empty()) manifest.inputs.push_back(syn_scenario);
      for (const auto& [k, v] : synth::scenario_to_key_values(sc))
        if (k != "[procedure]" && !manifest.config.contains(k)) manifest.config[k] = v;
      manifest.config["procedures"] = sc.procedures.size();
    };
  });

  // segment
  auto* seg = app.add_subcommand("segment", "Attach RDP segment IDs to a dataset");
  std::string seg_in, seg_out;
  double seg_eps = 0.01;
  seg->add_option("-i,--input", seg_in, "Input dataset")->required();
  seg->add_option("-o,--output", seg_out, "Output dataset")->required();
  seg->add_option("--epsilon", seg_eps, "RDP threshold in scaled units")->check(CLI::PositiveNumber);
  seg->callback([&] {
    action = [&] {
      require_file(seg_in, "input");
      auto data = io::read_dataset(seg_in);
      auto ids = segmentation::segment_dataset(data, {segmentation::effective_epsilon(data, seg_eps)}, g.threads);
      if (std::all_of(ids.begin(), ids.end(), [](const SegmentIds& s) { return s.back() == 1; }))
        spdlog::warn("epsilon {} leaves every trajectory as a single segment (all segment IDs are 1)", seg_eps);
      data.set_segment_ids(ids);
      data.meta().set("segment_epsilon", fmt_double(seg_eps));
      io::write_dataset(seg_out, data);
      manifest = {"segment", {seg_in}, {seg_out}, {{"epsilon", seg_eps}}};
    };
  });

  // train
  auto* trn = app.add_subcommand("train", "Train the encoder on a segmented dataset");
  std::string trn_in, trn_out, trn_loss;
  TrainOptions topts;
  trn->add_option("-i,--input", trn_in, "Segmented training dataset")->required();
  trn->add_option("-o,--output", trn_out, "Checkpoint path")->required();
  trn->add_option("--loss-csv", trn_loss, "Per-epoch loss log");
  topts.add_to(trn);
  trn->callback([&] {
    action = [&] {
      require_file(trn_in, "input");
      auto data = io::read_dataset(trn_in);
      if (!data.has_segment_ids()) throw std::runtime_error("dataset has no segment IDs; run segment first");
      std::vector<SegmentIds> ids;
      for (std::size_t i = 0; i < data.size(); ++i) ids.push_back(data.segment_ids(i));
      auto tc = topts.train_config(g.seed);
      auto result = train::train(data, ids, topts.encoder_config(), tc, [&](std::size_t e, double l) {
        if (!quiet) spdlog::info("epoch {} loss {:.6f}", e + 1, l);
      });
      const std::string eps = data.meta().get("segment_epsilon").value_or("");
      encoder::save_checkpoint(trn_out, result.encoder,
                               {{"epsilon", eps},
                                {"tau", fmt_double(tc.tau)},
                                {"seed", std::to_string(g.seed)},
                                {"features", tc.features.name()},
                                {"variant", std::string(loss::variant_name(tc.variant))},
                                {"epochs_run", std::to_string(result.epoch_loss.size())}});
      manifest = {"train", {trn_in}, {trn_out}, topts.to_json()};
      manifest.config["epsilon"] = eps;
      if (!trn_loss.empty()) {
        train::write_loss_csv(trn_loss, result.epoch_loss);
        manifest.outputs.push_back(trn_loss);
      }
    };
  });

  // encode
  auto* enc = app.add_subcommand("encode", "Write last-timestep representations");
  std::string enc_ckpt, enc_in, enc_out;
  enc->add_option("-c,--checkpoint", enc_ckpt, "Encoder checkpoint")->required();
  enc->add_option("-i,--input", enc_in, "Dataset")->required();
  enc->add_option("-o,--output", enc_out, "Representation file")->required();
  enc->callback([&] {
    action = [&] {
      require_file(enc_ckpt, "checkpoint");
      require_file(enc_in, "input");
      auto ck = encoder::load_checkpoint(enc_ckpt);
      auto data = io::read_dataset(enc_in);
      auto sel = features::FeatureSelector::parse(kv_get(ck.extra, "features", "all"));
      auto reprs = train::embed(ck.encoder, data, sel);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < data.size(); ++i) ids.push_back(data.id(i));
      eval::write_reprs(enc_out, ids, data.labels_or(-1), reprs);
      manifest = {"encode", {enc_ckpt, enc_in}, {enc_out}, {}};
    };
  });

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "SVM accuracy and k-means NMI/ARI on a train/test pair");
  std::string ev_ckpt, ev_train, ev_test, ev_out, ev_name;
  bool ev_baseline = false, ev_append = false;
  ev->add_option("-c,--checkpoint", ev_ckpt, "Encoder checkpoint");
  ev->add_option("--train", ev_train, "Labeled training dataset")->required();
  ev->add_option("--test", ev_test, "Labeled test dataset")->required();
  ev->add_option("-o,--output", ev_out, "Metrics CSV")->required();
  ev->add_option("--name", ev_name, "Dataset name for the metrics row");
  ev->add_flag("--baseline", ev_baseline, "Score raw final-state features instead of an encoder");
  ev->add_flag("--append", ev_append, "Append a row to an existing metrics CSV");
  ev->callback([&] {
    action = [&] {
      if (ev_ckpt.empty() && !ev_baseline) throw std::runtime_error("checkpoint required (pass --checkpoint)");
      require_file(ev_train, "train dataset");
      require_file(ev_test, "test dataset");
      auto tr = io::read_dataset(ev_train);
      auto te = io::read_dataset(ev_test);
      const auto tr_y = require_labels(tr, "train dataset");
      const auto te_y = require_labels(te, "test dataset");
      eval::MetricRow row;
      row.dataset = ev_name.empty() ? fs::path(ev_test).stem().string() : ev_name;
      row.seed = g.seed;
      eval::Matrix xtr, xte;
      manifest = {"evaluate", {ev_train, ev_test}, {ev_out}, {}};
      manifest.config["svm_c"] = eval::SvmParams{}.c;
      manifest.config["svm_gamma"] = "1/(K*var(train))";
      manifest.config["kmeans_restarts"] = eval::KMeansParams{}.restarts;
      if (ev_baseline) {
        xtr = final_state_features(tr);
        xte = final_state_features(te);
        manifest.config["representation"] = "raw-final-state";
        row.epsilon = std::nan("");
        row.tau = std::nan("");
      } else {
        require_file(ev_ckpt, "checkpoint");
        auto ck = encoder::load_checkpoint(ev_ckpt);
        auto sel = features::FeatureSelector::parse(kv_get(ck.extra, "features", "all"));
        xtr = train::embed(ck.encoder, tr, sel);
        xte = train::embed(ck.encoder, te, sel);
        const std::string eps = kv_get(ck.extra, "epsilon", "");
        row.epsilon = eps.empty() ? std::nan("") : std::stod(eps);
        row.tau = std::stod(kv_get(ck.extra, "tau", "nan"));
        row.seed = std::stoull(kv_get(ck.extra, "seed", std::to_string(g.seed)));
        manifest.inputs.push_back(ev_ckpt);
      }
      auto s = train::score_representations(xtr, tr_y, xte, te_y, g.seed);
      row.acc = s.acc;
      row.nmi = s.nmi;
      row.ari = s.ari;
      std::vector<eval::MetricRow> rows;
      if (ev_append && fs::exists(ev_out)) {
        std::ifstream in(ev_out);
        std::string line;
        std::getline(in, line);
        if (line != eval::kMetricsHeader) throw std::runtime_error("cannot append: " + ev_out + " is not a metrics CSV");
        std::ofstream out(ev_out, std::ios::app);
        out.precision(17);
        out << row.dataset << "," << row.epsilon << "," << row.tau << "," << row.seed << "," << row.acc << ","
            << row.nmi << "," << row.ari << "\n";
      } else {
        rows.push_back(row);
        eval::write_metrics_csv(ev_out, rows);
      }
      std::printf("acc %.4f nmi %.4f ari %.4f\n", s.acc, s.nmi, s.ari);
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Mutual information of k-means clusterings over k");
  std::string sw_in, sw_out;
  std::size_t sw_kmin = 0, sw_kmax = 100, sw_step = 5;
  sw->add_option("-i,--input", sw_in, "Representation file (from encode)")->required();
  sw->add_option("-o,--output", sw_out, "CSV with k,mi")->required();
  sw->add_option("--k-min", sw_kmin, "First k (default: number of classes)");
  sw->add_option("--k-max", sw_kmax, "Last k");
  sw->add_option("--step", sw_step, "Increment of k");
  sw->callback([&] {
    action = [&] {
      require_file(sw_in, "input");
      auto f = eval::read_reprs(sw_in);
      const std::size_t kmin = sw_kmin > 0 ? sw_kmin : class_count(f.labels);
      auto pts = eval::mi_sweep(f.reprs, f.labels, kmin, sw_kmax, sw_step, g.seed);
      eval::write_sweep_csv(sw_out, pts);
      manifest = {"sweep", {sw_in}, {sw_out}, {{"k_min", kmin}, {"k_max", sw_kmax}, {"step", sw_step}}};
    };
  });

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch", "Select epsilon and tau on a validation split of the training set");
  std::string gs_in, gs_out, gs_eps = "0.0001,0.001,0.01,0.1", gs_tau = "0.01,0.05,0.1,0.5,1,5,10";
  double gs_val = 0.25;
  TrainOptions gopts;
  gs->add_option("-i,--input", gs_in, "Labeled training dataset")->required();
  gs->add_option("-o,--output", gs_out, "Grid table CSV")->required();
  gs->add_option("--epsilons", gs_eps, "Comma-separated epsilon grid");
  gs->add_option("--taus", gs_tau, "Comma-separated tau grid");
  gs->add_option("--validation-fraction", gs_val, "Share of training flights held out");
  gopts.add_to(gs);
  gs->callback([&] {
    action = [&] {
      require_file(gs_in, "input");
      auto data = io::read_dataset(gs_in);
      require_labels(data, "training dataset");
      auto eps = parse_list(gs_eps);
      auto taus = parse_list(gs_tau);
      auto res = train::grid_search(data, eps, taus, gopts.encoder_config(), gopts.train_config(g.seed), gs_val,
                                    g.threads);
      auto out = io::open_output(gs_out);
      out.precision(17);
      out << "epsilon,tau,acc,nmi,ari,status,best\n";
      for (std::size_t c = 0; c < res.cells.size(); ++c) {
        const auto& cell = res.cells[c];
        out << cell.epsilon << "," << cell.tau << ",";
        if (cell.failed) out << ",,,failed,0\n";
        else out << cell.scores.acc << "," << cell.scores.nmi << "," << cell.scores.ari << ",ok," << (res.best == c) << "\n";
      }
      if (res.best) {
        const auto& b = res.cells[*res.best];
        std::printf("best epsilon %g tau %g (acc %.4f nmi %.4f)\n", b.epsilon, b.tau, b.scores.acc, b.scores.nmi);
      } else {
        spdlog::warn("every grid cell failed");
      }
      manifest = {"gridsearch", {gs_in}, {gs_out}, gopts.to_json()};
      manifest.config["epsilons"] = eps;
      manifest.config["taus"] = taus;
    };
  });

  // project
  auto* pj = app.add_subcommand("project", "2-D PCA projection of representations");
  std::string pj_in, pj_out;
  std::size_t pj_dims = 2;
  pj->add_option("-i,--input", pj_in, "Representation file (from encode)")->required();
  pj->add_option("-o,--output", pj_out, "CSV with id,label,pc1,pc2")->required();
  pj->add_option("--dims", pj_dims, "Number of components");
  pj->callback([&] {
    action = [&] {
      require_file(pj_in, "input");
      auto f = eval::read_reprs(pj_in);
      auto proj = eval::pca_project(f.reprs, pj_dims);
      eval::write_projection_csv(pj_out, f.ids, f.labels, proj);
      manifest = {"project", {pj_in}, {pj_out}, {{"dims", pj_dims}}};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    action();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(manifest, app, g, wall);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
