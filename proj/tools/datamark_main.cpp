// datamark: watermark classification datasets with poison-only backdoor
// triggers and audit suspicious models over a black-box query interface.
#include "datamark/harness.hpp"
#include "datamark/mock_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

using namespace datamark;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTrainedOnDataset = 3;

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

TensorShape parse_shape(const std::vector<int>& dims) {
  if (dims.size() != 3) throw CLI::ValidationError("--shape expects C,H,W");
  return {dims[0], dims[1], dims[2]};
}

struct ScenarioFlags {
  std::string modality = "tensor";
  std::string kind = "steal";
  std::string train_trigger;
  std::string verify_trigger;
  double gamma = -1.0;
  int target_label = -1;
  int epochs = -1;
  int batch = -1;
  double lr = -1.0;
  double l2 = -1.0;
  int m = -1;
  double tau = -1.0;
  double alpha = -1.0;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd, bool with_kind) {
    cmd->add_option("--modality", modality, "tensor|tokens|graph")
        ->check(CLI::IsMember({"tensor", "tokens", "graph"}));
    if (with_kind) {
      cmd->add_option("--kind", kind,
                      "steal|independent-trigger|independent-model")
          ->check(CLI::IsMember(
              {"steal", "independent-trigger", "independent-model"}));
    }
    cmd->add_option("--train-trigger", train_trigger, "trigger preset name");
    cmd->add_option("--verify-trigger", verify_trigger,
                    "trigger preset used at verification (defaults per scenario)");
    cmd->add_option("--gamma", gamma, "poisoning rate in (0,1)");
    cmd->add_option("--target-label", target_label,
                    "target class (default: half of K)");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch", batch, "SGD batch size");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--l2", l2, "L2 penalty");
    cmd->add_option("--m", m, "verification sampling number");
    cmd->add_option("--tau", tau, "certainty shift for the paired t-test");
    cmd->add_option("--alpha", alpha, "significance level");
    cmd->add_option("--seed", seed, "experiment seed");
  }

  ScenarioSpec build() const {
    auto spec = ScenarioSpec::defaults_for(modality_from_name(modality),
                                           scenario_from_name(kind));
    if (!train_trigger.empty()) spec.train_trigger = train_trigger;
    if (!verify_trigger.empty()) spec.verify_trigger = verify_trigger;
    if (gamma > 0.0) spec.gamma = gamma;
    if (target_label >= 0) spec.target_label = target_label;
    if (epochs > 0) spec.train.epochs = epochs;
    if (batch > 0) spec.train.batch_size = batch;
    if (lr > 0.0) spec.train.learning_rate = lr;
    if (l2 >= 0.0) spec.train.l2 = l2;
    if (m > 0) spec.verify.m = m;
    if (tau >= 0.0) spec.verify.tau = tau;
    if (alpha > 0.0) spec.verify.alpha = alpha;
    spec.seed = seed;
    return spec;
  }
};

volatile std::sig_atomic_t g_stop_requested = 0;
void handle_stop(int) { g_stop_requested = 1; }

int run_cli(int argc, char** argv) {
  CLI::App app{
      "datamark: dataset watermarking via poison-only backdoors and "
      "hypothesis-test ownership verification"};
  app.require_subcommand(1);

  // ---- synth ----------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string sy_modality = "tensor";
  int sy_classes = 10, sy_per_class = 500;
  std::vector<int> sy_shape{1, 16, 16};
  double sy_sep = 3.0;
  int sy_vocab = 200, sy_seq_len = 8;
  int sy_nodes_min = 20, sy_nodes_max = 40;
  std::vector<double> sy_edge_probs{0.1, 0.3, 0.6};
  std::uint64_t sy_seed = 0;
  std::string sy_out;
  synth->add_option("--modality", sy_modality)->check(CLI::IsMember({"tensor", "tokens", "graph"}));
  synth->add_option("--classes", sy_classes, "number of classes");
  synth->add_option("--per-class", sy_per_class, "samples per class");
  synth->add_option("--shape", sy_shape, "tensor shape C,H,W")->delimiter(',');
  synth->add_option("--sep", sy_sep, "class separation (tensor)");
  synth->add_option("--vocab", sy_vocab, "vocabulary size (tokens)");
  synth->add_option("--seq-len", sy_seq_len, "sequence length (tokens)");
  synth->add_option("--nodes-min", sy_nodes_min, "min node count (graph)");
  synth->add_option("--nodes-max", sy_nodes_max, "max node count (graph)");
  synth->add_option("--edge-probs", sy_edge_probs, "per-class edge probabilities")->delimiter(',');
  synth->add_option("--seed", sy_seed);
  synth->add_option("--out", sy_out, "output JSONL path")->required();
  synth->callback([&]() {
    Dataset d;
    switch (modality_from_name(sy_modality)) {
      case Modality::Tensor:
        d = synth_tensor_dataset(sy_classes, sy_per_class, parse_shape(sy_shape),
                                 sy_sep, sy_seed);
        break;
      case Modality::Tokens:
        d = synth_token_dataset(sy_classes, sy_per_class, sy_vocab, sy_seq_len,
                                sy_seed);
        break;
      case Modality::Graph:
        d = synth_graph_dataset(sy_classes, sy_per_class,
                                {sy_nodes_min, sy_nodes_max}, sy_edge_probs,
                                sy_seed);
        break;
    }
    save_dataset(d, sy_out);
    std::cout << "wrote " << d.size() << " samples to " << sy_out << "\n";
  });

  // ---- watermark ------------------------------------------------------
  auto* wm = app.add_subcommand("watermark",
                                "poison a dataset and emit the owner manifest");
  std::string wm_in, wm_out, wm_manifest, wm_trigger = "patch-line", wm_trigger_file;
  int wm_target = -1;
  double wm_gamma = 0.1;
  std::uint64_t wm_seed = 0;
  wm->add_option("--in", wm_in, "benign dataset JSONL")->required();
  wm->add_option("--trigger", wm_trigger, "trigger preset name");
  wm->add_option("--trigger-file", wm_trigger_file, "trigger JSON file (overrides preset)");
  wm->add_option("--target-label", wm_target, "target class (default: half of K)");
  wm->add_option("--gamma", wm_gamma, "poisoning rate in (0,1)");
  wm->add_option("--seed", wm_seed);
  wm->add_option("--out", wm_out, "poisoned dataset JSONL")->required();
  wm->add_option("--manifest", wm_manifest, "manifest output path")->required();
  wm->callback([&]() {
    Dataset d = load_dataset(wm_in);
    TriggerSpec trig;
    if (!wm_trigger_file.empty()) {
      std::ifstream in(wm_trigger_file);
      if (!in) throw std::runtime_error("cannot open: " + wm_trigger_file);
      json j;
      in >> j;
      trig = trigger_from_json(j);
    } else {
      trig = make_trigger_preset(wm_trigger, d.meta, wm_seed);
    }
    int y_t = wm_target >= 0 ? wm_target : d.meta.num_classes / 2;
    auto result = watermark_dataset(d, trig, y_t, wm_gamma, wm_seed);
    save_dataset(result.poisoned, wm_out);
    result.manifest.save(wm_manifest);
    std::cout << "poisoned " << result.manifest.modified_indices.size() << " of "
              << d.size() << " samples (target label " << y_t << ")\n";
  });

  // ---- train ----------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train an MLP on a dataset");
  std::string tr_in, tr_out;
  TrainConfig tr_cfg;
  int tr_bins = 20, tr_cap = 39;
  std::vector<int> tr_hidden{64};
  tr->add_option("--in", tr_in, "training dataset JSONL")->required();
  tr->add_option("--epochs", tr_cfg.epochs);
  tr->add_option("--batch", tr_cfg.batch_size);
  tr->add_option("--lr", tr_cfg.learning_rate);
  tr->add_option("--l2", tr_cfg.l2);
  tr->add_option("--hidden", tr_hidden, "hidden layer widths")->delimiter(',');
  tr->add_option("--bins", tr_bins, "degree-histogram bins (graph)");
  tr->add_option("--degree-cap", tr_cap, "degree cap (graph)");
  tr->add_option("--seed", tr_cfg.seed);
  tr->add_option("--out", tr_out, "model output path")->required();
  tr->callback([&]() {
    Dataset d = load_dataset(tr_in);
    tr_cfg.hidden = tr_hidden;
    Featurizer feat = Featurizer::for_dataset(d.meta, tr_bins, tr_cap);
    auto result = train(d, feat, tr_cfg);
    save_model(result.params, feat, tr_out);
    std::cout << "trained " << result.loss_trace.size() << " epochs; final loss "
              << result.loss_trace.back() << "; saved to " << tr_out << "\n";
  });

  // ---- metrics --------------------------------------------------------
  auto* me = app.add_subcommand("metrics", "evaluate BA (and WSR with a manifest)");
  std::string me_model, me_test, me_manifest, me_out;
  me->add_option("--model", me_model)->required();
  me->add_option("--test", me_test, "benign test dataset JSONL")->required();
  me->add_option("--manifest", me_manifest, "watermark manifest for WSR");
  me->add_option("--out", me_out, "write JSON here instead of stdout");
  me->callback([&]() {
    auto [params, feat] = load_model(me_model);
    Dataset test = load_dataset(me_test);
    json out;
    out["ba"] = benign_accuracy(params, feat, test);
    if (!me_manifest.empty()) {
      auto manifest = WatermarkManifest::load(me_manifest);
      out["wsr"] = watermark_success_rate(params, feat, test, manifest.trigger,
                                          manifest.target_label);
    }
    write_text(me_out, out.dump(2));
  });

  // ---- verify ---------------------------------------------------------
  auto* ve = app.add_subcommand(
      "verify", "black-box ownership verification against a suspect model");
  std::string ve_benign, ve_manifest, ve_model, ve_url, ve_mode = "proba", ve_out;
  std::string ve_auth;
  int ve_num_classes = 0, ve_max_batch = 64, ve_retries = 3, ve_parallelism = 1;
  double ve_timeout = 10.0;
  VerificationConfig ve_cfg;
  std::vector<int> ve_allowed;
  std::string ve_label_method = "exact-binomial";
  ve->add_option("--benign", ve_benign, "benign dataset JSONL")->required();
  ve->add_option("--manifest", ve_manifest, "watermark manifest")->required();
  ve->add_option("--mode", ve_mode, "proba|label")->check(CLI::IsMember({"proba", "label"}));
  ve->add_option("--model", ve_model, "local suspect model file");
  ve->add_option("--url", ve_url, "remote suspect base URL");
  ve->add_option("--num-classes", ve_num_classes, "K of the remote model");
  ve->add_option("--timeout", ve_timeout, "remote timeout seconds");
  ve->add_option("--max-batch", ve_max_batch, "remote max batch size");
  ve->add_option("--retries", ve_retries, "remote retry count");
  ve->add_option("--parallelism", ve_parallelism, "concurrent remote chunks");
  ve->add_option("--auth-header", ve_auth, "static auth header \"Name: value\"");
  ve->add_option("--m", ve_cfg.m, "sampling number");
  ve->add_option("--tau", ve_cfg.tau);
  ve->add_option("--alpha", ve_cfg.alpha);
  ve->add_option("--seed", ve_cfg.seed);
  ve->add_option("--allowed-classes", ve_allowed,
                 "restrict sampling to these source classes")->delimiter(',');
  ve->add_option("--label-method", ve_label_method,
                 "exact-binomial|wilcoxon-signed-rank")
      ->check(CLI::IsMember({"exact-binomial", "wilcoxon-signed-rank"}));
  ve->add_option("--out", ve_out, "verdict JSON path");
  // Exit code is mapped by the caller; stash the verdict here.
  std::optional<VerdictReport> verdict_slot;
  ve->callback([&]() {
    Dataset benign = load_dataset(ve_benign);
    auto manifest = WatermarkManifest::load(ve_manifest);
    ve_cfg.allowed_source_classes = ve_allowed;
    ve_cfg.label_method = ve_label_method == "exact-binomial"
                              ? LabelTestMethod::ExactBinomial
                              : LabelTestMethod::WilcoxonSignedRank;
    QueryMode mode = query_mode_from_name(ve_mode);

    SuspectHandle handle = [&]() {
      if (!ve_model.empty()) {
        auto [params, feat] = load_model(ve_model);
        return SuspectHandle::local(std::move(params), std::move(feat), mode);
      }
      if (ve_url.empty())
        throw std::runtime_error("verify needs --model or --url");
      RemoteEndpoint ep;
      ep.base_url = ve_url;
      ep.num_classes = ve_num_classes > 0 ? ve_num_classes : benign.meta.num_classes;
      ep.timeout_seconds = ve_timeout;
      ep.max_batch = ve_max_batch;
      ep.max_retries = ve_retries;
      ep.parallelism = ve_parallelism;
      ep.auth_header = ve_auth;
      return SuspectHandle::remote(ep, mode);
    }();

    VerdictReport verdict =
        mode == QueryMode::Probability
            ? verify_probability(benign, manifest.trigger, manifest.target_label,
                                 handle, ve_cfg)
            : verify_label_only(benign, manifest.trigger, manifest.target_label,
                                handle, ve_cfg);
    write_text(ve_out, verdict.to_json().dump(2));
    verdict_slot = verdict;
  });

  // ---- scenario -------------------------------------------------------
  auto* sc = app.add_subcommand("scenario", "run one audit scenario end to end");
  ScenarioFlags sc_flags;
  std::string sc_out_dir = "reports";
  sc_flags.add_to(sc, /*with_kind=*/true);
  sc->add_option("--out-dir", sc_out_dir, "report directory");
  sc->callback([&]() {
    auto report = run_scenario(sc_flags.build());
    auto path = write_report(report, sc_out_dir);
    std::cout << report.to_json().dump(2) << "\nreport: " << path << "\n";
  });

  // ---- sweep-gamma ----------------------------------------------------
  auto* sg = app.add_subcommand("sweep-gamma", "BA/WSR over poisoning rates");
  ScenarioFlags sg_flags;
  std::vector<double> sg_gammas{0.01, 0.05, 0.1, 0.2};
  std::string sg_format = "csv", sg_out;
  sg_flags.add_to(sg, /*with_kind=*/false);
  sg->add_option("--gammas", sg_gammas, "poisoning rates")->delimiter(',');
  sg->add_option("--format", sg_format)->check(CLI::IsMember({"csv", "json"}));
  sg->add_option("--out", sg_out, "write the table here instead of stdout");
  sg->callback([&]() {
    auto rows = sweep_gamma(sg_gammas, sg_flags.build());
    write_text(sg_out, sg_format == "csv" ? gamma_rows_csv(rows)
                                          : gamma_rows_json(rows).dump(2));
  });

  // ---- sweep-m --------------------------------------------------------
  auto* sm = app.add_subcommand("sweep-m", "p-values over sampling numbers");
  ScenarioFlags sm_flags;
  std::vector<int> sm_ms{20, 40, 60, 80, 100, 120, 140};
  std::string sm_format = "csv", sm_out;
  sm_flags.add_to(sm, /*with_kind=*/false);
  sm->add_option("--ms", sm_ms, "sampling numbers")->delimiter(',');
  sm->add_option("--format", sm_format)->check(CLI::IsMember({"csv", "json"}));
  sm->add_option("--out", sm_out);
  sm->callback([&]() {
    auto rows = sweep_m(sm_ms, sm_flags.build());
    write_text(sm_out, sm_format == "csv" ? m_rows_csv(rows)
                                          : m_rows_json(rows).dump(2));
  });

  // ---- finetune -------------------------------------------------------
  auto* ft = app.add_subcommand("finetune",
                                "last-layer fine-tuning resistance curve");
  ScenarioFlags ft_flags;
  double ft_fraction = 0.1, ft_lr = -1.0;
  int ft_epochs = 20;
  std::string ft_format = "csv", ft_out;
  ft_flags.add_to(ft, /*with_kind=*/false);
  ft->add_option("--fraction", ft_fraction, "benign fraction used for fine-tuning");
  ft->add_option("--ft-epochs", ft_epochs, "fine-tuning epochs to record");
  ft->add_option("--ft-lr", ft_lr, "fine-tuning learning rate (default: training rate)");
  ft->add_option("--format", ft_format)->check(CLI::IsMember({"csv", "json"}));
  ft->add_option("--out", ft_out);
  ft->callback([&]() {
    std::vector<int> schedule;
    for (int e = 1; e <= ft_epochs; ++e) schedule.push_back(e);
    auto rows = finetune_resistance(ft_flags.build(), ft_fraction, schedule, ft_lr);
    write_text(ft_out, ft_format == "csv" ? finetune_rows_csv(rows)
                                          : finetune_rows_json(rows).dump(2));
  });

  // ---- serve-mock -----------------------------------------------------
  auto* sv = app.add_subcommand("serve-mock",
                                "serve a saved model over the prediction protocol");
  std::string sv_model, sv_host = "127.0.0.1", sv_port_file;
  int sv_port = 0;
  sv->add_option("--model", sv_model)->required();
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port, "0 picks an ephemeral port");
  sv->add_option("--port-file", sv_port_file, "write the bound port here");
  sv->callback([&]() {
    auto [params, feat] = load_model(sv_model);
    MockModelServer server(std::move(params), std::move(feat));
    int port = server.start(sv_host, sv_port);
    if (!sv_port_file.empty()) {
      std::ofstream out(sv_port_file);
      out << port << "\n";
    }
    std::cout << "listening on " << sv_host << ":" << port << std::endl;
    std::signal(SIGINT, handle_stop);
    std::signal(SIGTERM, handle_stop);
    while (!g_stop_requested)
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  if (ve->parsed() && verdict_slot.has_value())
    return verdict_exit_code(*verdict_slot);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
