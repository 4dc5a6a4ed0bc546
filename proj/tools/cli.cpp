#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "relsal/error.hpp"
#include "relsal/harness/evaluate.hpp"
#include "relsal/harness/manifest.hpp"
#include "relsal/harness/overlay.hpp"
#include "relsal/harness/report.hpp"
#include "relsal/harness/synthetic.hpp"
#include "relsal/harness/toy.hpp"
#include "relsal/image_io.hpp"
#include "relsal/net/pca.hpp"
#include "relsal/stack.hpp"
#include "relsal/version.hpp"

namespace relsal::cli {
namespace fs = std::filesystem;
using namespace relsal::harness;

namespace {

struct EvalFlags {
  std::string manifest;
  std::string pred_dir;
  double beta2 = kDefaultBeta2;
  int thresholds = kDefaultThresholds;
  int workers = 0;
  std::string out;
  std::string format = "json";
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f, bool detection) {
  cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--pred-dir", f.pred_dir, "Directory of <id>.png prediction maps")
      ->required()
      ->check(CLI::ExistingDirectory);
  if (detection) {
    cmd->add_option("--beta2", f.beta2, "F-measure beta squared")->capture_default_str();
    cmd->add_option("--thresholds", f.thresholds, "Number of binarization thresholds")
        ->capture_default_str()
        ->check(CLI::Range(2, 65536));
  }
  cmd->add_option("--workers", f.workers, "Evaluation threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", f.out, "Report path");
  cmd->add_option("--format", f.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

EvalConfig eval_config(const EvalFlags& f) {
  EvalConfig c;
  c.beta2 = f.beta2;
  c.thresholds = f.thresholds;
  c.workers = f.workers;
  return c;
}

void maybe_write(const EvalFlags& f, const RunReport& report, std::ostream& out) {
  if (!f.out.empty()) {
    write_report(f.out, report, report_format_from_name(f.format));
    out << "report written to " << f.out << '\n';
  }
}

std::vector<std::string> labels_for(int n_classes) {
  for (const char* name : {"sos", "pascals"}) {
    const CountScheme s = CountScheme::from_name(name);
    if (static_cast<int>(s.size()) == n_classes) {
      return s.labels();
    }
  }
  std::vector<std::string> labels;
  for (int i = 0; i < n_classes; ++i) {
    labels.push_back("class" + std::to_string(i));
  }
  return labels;
}

std::vector<LabeledImage> load_all(const DatasetManifest& manifest) {
  std::vector<LabeledImage> data;
  data.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    data.push_back(load_record(rec));
  }
  return data;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relative salience toolkit: stacks, metrics, toy network", "relsal"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // build-stack
  std::string bs_agreement;
  std::string bs_out;
  int bs_observers = kDefaultObservers;
  auto* build_stack = app.add_subcommand("build-stack", "Split an agreement map into nested slices");
  build_stack->add_option("--agreement", bs_agreement, "Agreement map (raw observer counts)")
      ->required()
      ->check(CLI::ExistingFile);
  build_stack->add_option("--n-observers", bs_observers, "Observer count N")
      ->capture_default_str()
      ->check(CLI::Range(1, 255));
  build_stack->add_option("--out", bs_out, "Output directory for slice_XX.png")->required();

  EvalFlags detect_flags;
  auto* eval_detect =
      app.add_subcommand("eval-detect", "Detection metrics against every agreement slice");
  add_eval_flags(eval_detect, detect_flags, true);

  EvalFlags rank_flags;
  auto* eval_rank = app.add_subcommand("eval-rank", "Salient object ranking (SOR)");
  add_eval_flags(eval_rank, rank_flags, false);

  std::string sub_manifest;
  std::string sub_predictions;
  std::string sub_scheme = "sos";
  std::string sub_ap = "voc07";
  std::string sub_out;
  std::string sub_format = "json";
  auto* eval_subitize = app.add_subcommand("eval-subitize", "Subitizing average precision");
  eval_subitize->add_option("--manifest", sub_manifest, "Manifest with counts")
      ->required()
      ->check(CLI::ExistingFile);
  eval_subitize->add_option("--predictions", sub_predictions, "CSV: image_id,<class>...")
      ->required()
      ->check(CLI::ExistingFile);
  eval_subitize->add_option("--scheme", sub_scheme, "Count classes")
      ->check(CLI::IsMember({"sos", "pascals"}))
      ->capture_default_str();
  eval_subitize->add_option("--ap-method", sub_ap, "AP interpolation")
      ->check(CLI::IsMember({"voc07", "continuous"}))
      ->capture_default_str();
  eval_subitize->add_option("--out", sub_out, "Report path");
  eval_subitize->add_option("--format", sub_format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  SyntheticSpec spec;
  std::string gen_out;
  int gen_size = 64;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--count", spec.n_images, "Number of images")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen->add_option("--size", gen_size, "Canvas side in pixels")
      ->capture_default_str()
      ->check(CLI::Range(8, 4096));
  gen->add_option("--min-instances", spec.min_instances)->capture_default_str();
  gen->add_option("--max-instances", spec.max_instances)->capture_default_str();
  gen->add_option("--n-observers", spec.n_observers)->capture_default_str();

  ToyConfig toy;
  std::string train_manifest;
  std::string train_out;
  std::string train_log;
  std::string train_optimizer = "adam";
  auto* train = app.add_subcommand("train-toy", "Train the toy network");
  train->add_option("--manifest", train_manifest,
                    "Training manifest; default is the seeded 10-image synthetic set")
      ->check(CLI::ExistingFile);
  train->add_option("--seed", toy.train.seed, "Initialisation, shuffle and data seed")
      ->capture_default_str();
  train->add_option("--epochs", toy.train.epochs)->capture_default_str()->check(
      CLI::NonNegativeNumber);
  train->add_option("--batch-size", toy.train.batch_size)->capture_default_str()->check(
      CLI::PositiveNumber);
  train->add_option("--lr", toy.train.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--optimizer", train_optimizer)
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train->add_option("--subitizer-epochs", toy.train.subitizer_epochs)->capture_default_str();
  train->add_option("--stages", toy.model.stages, "Total predictions T including fusion")
      ->capture_default_str()
      ->check(CLI::Range(3, 5));
  train->add_flag("--atrous", toy.model.atrous, "Atrous pyramid pooling on the deepest feature");
  train->add_option("--gt-scale", toy.gt_scale, "Multiply targets by this factor")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train->add_option("--scheme", toy.scheme, "Subitizer count classes")
      ->check(CLI::IsMember({"sos", "pascals"}))
      ->capture_default_str();
  train->add_option("--out", train_out, "Checkpoint path");
  train->add_option("--log", train_log, "Training log CSV");

  std::string inf_checkpoint;
  std::string inf_manifest;
  std::string inf_out;
  auto* infer = app.add_subcommand("infer", "Predict saliency maps and count confidences");
  infer->add_option("--checkpoint", inf_checkpoint)->required()->check(CLI::ExistingFile);
  infer->add_option("--manifest", inf_manifest)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", inf_out, "Output directory")->required();

  std::string pca_checkpoint;
  std::string pca_image;
  std::string pca_out;
  int pca_stage = 0;
  auto* pca = app.add_subcommand("pca-vis", "Top-3 principal components of a predicted NRSS");
  pca->add_option("--checkpoint", pca_checkpoint)->required()->check(CLI::ExistingFile);
  pca->add_option("--image", pca_image)->required()->check(CLI::ExistingFile);
  pca->add_option("--stage", pca_stage, "Stage (1 = coarsest); 0 picks the finest")
      ->check(CLI::NonNegativeNumber);
  pca->add_option("--out", pca_out, "Output PNG")->required();

  EvalFlags vis_flags;
  auto* rank_vis = app.add_subcommand("rank-vis", "Colour instances by predicted rank");
  rank_vis->add_option("--manifest", vis_flags.manifest)->required()->check(CLI::ExistingFile);
  rank_vis->add_option("--pred-dir", vis_flags.pred_dir)
      ->required()
      ->check(CLI::ExistingDirectory);
  rank_vis->add_option("--out", vis_flags.out, "Output directory")->required();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (build_stack->parsed()) {
      const AgreementMap agreement = load_agreement_map(bs_agreement, bs_observers);
      const NestedStack stack = build_nested_stack(agreement);
      if (!(collapse_stack(stack) == agreement)) {
        throw InvariantError("stack does not collapse back to the agreement map");
      }
      fs::create_directories(bs_out);
      for (int k = 1; k <= stack.n_observers(); ++k) {
        std::ostringstream name;
        name << "slice_" << std::setw(2) << std::setfill('0') << k << ".png";
        save_binary_map(fs::path(bs_out) / name.str(), stack.slice(k));
        out << "slice " << k << " pixels " << stack.slice(k).count_ones() << '\n';
      }
      out << "slices " << stack.n_observers() << " nested yes\n";
    } else if (eval_detect->parsed()) {
      const RunReport report =
          run_eval(load_manifest(detect_flags.manifest), detect_flags.pred_dir,
                   eval_config(detect_flags));
      print_summary(out, report);
      maybe_write(detect_flags, report, out);
    } else if (eval_rank->parsed()) {
      const RunReport report =
          run_eval(load_manifest(rank_flags.manifest), rank_flags.pred_dir, eval_config(rank_flags));
      out << std::fixed << std::setprecision(4);
      if (report.sor) {
        out << "SOR " << report.sor->mean_sor << '\n';
        out << "valid " << report.sor->n_valid << " excluded " << report.sor->n_excluded << '\n';
      } else {
        out << "SOR undefined (no image has two distinctly ranked instances)\n";
      }
      maybe_write(rank_flags, report, out);
    } else if (eval_subitize->parsed()) {
      const DatasetManifest manifest = load_manifest(sub_manifest);
      std::vector<SubitizingTruth> truth;
      for (const auto& rec : manifest.records) {
        if (!rec.count) {
          throw IoError("record " + rec.id + " has no count");
        }
        truth.push_back({rec.id, *rec.count});
      }
      RunReport report;
      report.tool_version = kVersion;
      report.config.scheme = sub_scheme;
      report.config.ap_method = ap_method_from_name(sub_ap);
      report.subitizing =
          evaluate_subitizing(load_subitizing_predictions(sub_predictions), truth,
                              CountScheme::from_name(sub_scheme), report.config.ap_method);
      print_summary(out, report);
      if (!sub_out.empty()) {
        write_report(sub_out, report, report_format_from_name(sub_format));
        out << "report written to " << sub_out << '\n';
      }
    } else if (gen->parsed()) {
      spec.width = gen_size;
      spec.height = gen_size;
      const fs::path manifest = write_dataset(generate_synthetic(spec), gen_out);
      out << "wrote " << spec.n_images << " images, manifest " << manifest.generic_string()
          << '\n';
    } else if (train->parsed()) {
      toy.train.optimizer = net::optimizer_from_name(train_optimizer);
      const std::vector<LabeledImage> data =
          train_manifest.empty() ? generate_synthetic(default_toy_spec(toy.train.seed))
                                 : load_all(load_manifest(train_manifest));
      const ToyResult result = train_toy(data, toy);
      const auto& first = result.log.epochs.front();
      const auto& last = result.log.epochs.back();
      out << "images " << data.size() << " parameters "
          << net::parameter_count(result.checkpoint.params) << '\n';
      out << "initial loss " << format_number(first.total) << '\n';
      out << "final loss " << format_number(last.total) << " after " << last.epoch
          << " epochs\n";
      if (!result.log.subitizer_trajectory.empty()) {
        out << "subitizer loss " << format_number(result.log.subitizer_trajectory.front())
            << " -> " << format_number(result.log.subitizer_trajectory.back()) << '\n';
      }
      if (!train_out.empty()) {
        net::save_checkpoint(train_out, result.checkpoint);
        out << "checkpoint written to " << train_out << '\n';
      }
      if (!train_log.empty()) {
        std::ofstream log(train_log, std::ios::binary);
        if (!log) {
          throw IoError("cannot write " + train_log);
        }
        write_training_log(log, result.log);
      }
    } else if (infer->parsed()) {
      const net::Checkpoint ckpt = net::load_checkpoint(inf_checkpoint);
      const DatasetManifest manifest = load_manifest(inf_manifest);
      fs::create_directories(inf_out);
      std::vector<SubitizingPrediction> counts;
      for (const auto& rec : manifest.records) {
        const ImageData image = read_image(rec.image);
        save_saliency_map(fs::path(inf_out) / (rec.id + ".png"), predict_saliency(ckpt, image));
        counts.push_back({rec.id, predict_count_confidences(ckpt, image)});
      }
      const fs::path counts_path = fs::path(inf_out) / "counts.csv";
      write_subitizing_predictions(counts_path, counts, labels_for(ckpt.params.config.n_classes));
      out << "predicted " << manifest.records.size() << " images into " << inf_out << '\n';
    } else if (pca->parsed()) {
      const net::Checkpoint ckpt = net::load_checkpoint(pca_checkpoint);
      const auto trace = net::forward(rgb_tensor(read_image(pca_image)), ckpt.params);
      const int n_stages = static_cast<int>(trace.stages.size());
      const int stage = pca_stage == 0 ? n_stages : pca_stage;
      if (stage > n_stages) {
        throw RangeError("stage " + std::to_string(stage) + " out of range [1, " +
                         std::to_string(n_stages) + "]");
      }
      const auto vis = net::pca_visualize(trace.stages[static_cast<std::size_t>(stage - 1)].nrss);
      write_image(pca_out, vis.rgb);
      out << "stage " << stage << " components " << vis.valid_components
          << (vis.rank_deficient ? " rank-deficient" : "") << '\n';
    } else if (rank_vis->parsed()) {
      const DatasetManifest manifest = load_manifest(vis_flags.manifest);
      fs::create_directories(vis_flags.out);
      int correct = 0;
      for (const auto& rec : manifest.records) {
        const AgreementMap agreement = load_agreement_map(rec.agreement, rec.n_observers);
        const InstanceMap instances = load_instance_map(rec.instances);
        const SaliencyMap pred =
            load_saliency_map(fs::path(vis_flags.pred_dir) / (rec.id + ".png"));
        const RankVector gt = instances.instance_ids().empty()
                                  ? RankVector{}
                                  : gt_rank_from_agreement(agreement, instances);
        const ImageData overlay = render_rank_overlay(pred, instances, gt);
        write_image(fs::path(vis_flags.out) / (rec.id + ".png"), overlay);
        if (instances.instance_ids().empty() ||
            same_order(gt, rank_order(instance_rank_scores(pred, instances)))) {
          ++correct;
        }
      }
      out << "rendered " << manifest.records.size() << " overlays, " << correct
          << " with the exact ground-truth order\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace relsal::cli
