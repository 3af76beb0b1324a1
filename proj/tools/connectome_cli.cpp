#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "connectome/connectome.h"

namespace {

constexpr int kUsageError = 2;

struct Context {
  cx_context* ctx = nullptr;
  Context() {
    if (cx_context_create(&ctx) != CX_OK) throw std::runtime_error("cannot create library context");
  }
  ~Context() { cx_context_destroy(ctx); }
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;
};

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { cx_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

int check(cx_context* ctx, cx_status s) {
  if (s == CX_OK) return 0;
  std::cerr << "error (" << cx_status_string(s) << "): " << cx_last_error(ctx) << '\n';
  return 1;
}

int usage(const std::string& msg) {
  std::cerr << "usage error: " << msg << '\n';
  return kUsageError;
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  std::ostringstream ss;
  ss << is.rdbuf();
  out = ss.str();
  return true;
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connectome prediction pipeline: stochastic parcellations, connectivity features, models and ensembles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cx_version()));

  int jobs = 1;
  std::optional<std::uint64_t> seed;
  app.add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Run seed (default: config file, then CONNECTOME_SEED, then 0)");

  // synth-gen
  auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic cohort with planted correlations");
  std::string synth_config, synth_out;
  bool synth_print = false;
  synth->add_option("--config", synth_config, "JSON config (defaults when omitted)")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_flag("--print-config", synth_print, "Print the default config and exit");

  // parcellate
  auto* parc = app.add_subcommand("parcellate", "Sample stochastic parcellations of a gray-matter mask");
  std::string parc_mask, parc_out;
  std::vector<int> parc_scales;
  std::vector<std::uint64_t> parc_seeds;
  int parc_count = 1;
  bool parc_check = false;
  parc->add_option("--mask", parc_mask, "Gray-matter mask CVOL")->required();
  auto* regions_opt = parc->add_option("--regions", parc_scales, "Target region count");
  auto* scales_opt = parc->add_option("--scales", parc_scales, "Comma-separated region counts")->delimiter(',');
  regions_opt->excludes(scales_opt);
  auto* seeds_opt = parc->add_option("--seeds", parc_seeds, "Explicit seeds");
  parc->add_option("--count", parc_count, "Parcellations per scale when --seeds is absent")
      ->check(CLI::PositiveNumber)
      ->excludes(seeds_opt);
  parc->add_flag("--check", parc_check, "Validate every parcellation");
  parc->add_option("--out", parc_out, "Output directory")->required();

  // extract
  auto* ext = app.add_subcommand("extract", "Compute connectivity features for every subject");
  std::string ext_manifest, ext_parc, ext_kind, ext_mask, ext_out;
  double ext_scrub = 0.5;
  ext->add_option("--manifest", ext_manifest, "Cohort manifest")->required();
  ext->add_option("--parcellation", ext_parc, "Label CVOL")->required();
  ext->add_option("--features", ext_kind, "fingerprint, matrix or vector")
      ->required()
      ->check(CLI::IsMember({"fingerprint", "matrix", "vector"}));
  ext->add_option("--mask", ext_mask, "Voxel mask for fingerprints (default: parcellation support)");
  ext->add_option("--scrub-threshold", ext_scrub, "Framewise displacement threshold in mm");
  ext->add_option("--out", ext_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one model on a features directory");
  std::string tr_model, tr_task, tr_features, tr_config, tr_out;
  bool tr_print = false;
  tr->add_option("--model", tr_model, "ridge, fcn, cnn3d or brainnet")
      ->required()
      ->check(CLI::IsMember({"ridge", "fcn", "cnn3d", "brainnet"}));
  tr->add_option("--task", tr_task, "cls or reg")
      ->required()
      ->check(CLI::IsMember({"cls", "reg", "classification", "regression"}));
  tr->add_option("--features", tr_features, "Features directory");
  tr->add_option("--config", tr_config, "JSON hyperparameters; absent keys keep defaults")->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Checkpoint path");
  tr->add_flag("--print-config", tr_print, "Print the full default config and exit");

  // predict
  auto* pr = app.add_subcommand("predict", "Predict with one checkpoint");
  std::string pr_ckpt, pr_features, pr_out;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--features", pr_features, "Features directory")->required();
  pr->add_option("--out", pr_out, "Predictions JSON")->required();

  // ensemble-predict
  auto* ens = app.add_subcommand("ensemble-predict", "Fuse members by majority vote or mean");
  std::vector<std::string> ens_ckpts, ens_features, ens_preds;
  std::string ens_out;
  auto* ens_c = ens->add_option("--checkpoints", ens_ckpts, "Member checkpoints");
  ens->add_option("--features", ens_features, "Features directory per checkpoint (or one shared)");
  auto* ens_p = ens->add_option("--predictions", ens_preds, "Member prediction files");
  ens_c->excludes(ens_p);
  ens->add_option("--out", ens_out, "Predictions JSON")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Accuracy and AUC, or RMSE and MAE");
  std::string ev_preds, ev_out;
  ev->add_option("--predictions", ev_preds, "Predictions JSON")->required();
  ev->add_option("--out", ev_out, "Report JSON");

  // bootstrap
  auto* bs = app.add_subcommand("bootstrap", "Paired bootstrap of a metric difference");
  std::string bs_a, bs_b, bs_metric = "accuracy", bs_out;
  int bs_reps = 10000;
  bs->add_option("--a", bs_a, "Predictions of model A")->required();
  bs->add_option("--b", bs_b, "Predictions of model B")->required();
  bs->add_option("--metric", bs_metric, "accuracy, auc, rmse or mae")
      ->check(CLI::IsMember({"accuracy", "auc", "rmse", "mae"}));
  bs->add_option("--replicates", bs_reps, "Resamples")->check(CLI::PositiveNumber);
  bs->add_option("--out", bs_out, "Output directory")->required();

  // saliency
  auto* sal = app.add_subcommand("saliency", "Input-gradient maps of cnn3d models");
  std::vector<std::string> sal_ckpts, sal_features, sal_subjects;
  std::string sal_out;
  sal->add_option("--checkpoints", sal_ckpts, "cnn3d checkpoints")->required();
  sal->add_option("--features", sal_features, "Fingerprint directory per checkpoint (or one shared)")->required();
  sal->add_option("--subjects", sal_subjects, "Subject ids (default: all)");
  sal->add_option("--out", sal_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  Context c;
  cx_context* ctx = c.ctx;
  std::string cmdline;
  for (int i = 0; i < argc; ++i) cmdline += (i ? " " : "") + std::string(argv[i]);
  cx_context_set_command_line(ctx, cmdline.c_str());
  if (int rc = check(ctx, cx_context_set_jobs(ctx, jobs))) return rc;
  if (seed)
    if (int rc = check(ctx, cx_context_set_seed(ctx, *seed))) return rc;

  auto pair_up = [](std::vector<std::string>& features, std::size_t n) {
    if (features.size() == 1 && n > 1) features.assign(n, features.front());
    return features.size() == n;
  };

  if (*synth) {
    if (synth_print) {
      OwnedString s;
      if (int rc = check(ctx, cx_synth_default_config(ctx, &s.p))) return rc;
      std::cout << s.str();
      return 0;
    }
    if (synth_out.empty()) return usage("synth-gen needs --out");
    std::string text;
    if (!synth_config.empty() && !read_file(synth_config, text)) return usage("cannot read " + synth_config);
    if (int rc = check(ctx, cx_synth_generate(ctx, text.empty() ? nullptr : text.c_str(), synth_out.c_str()))) return rc;
    std::cout << "wrote " << synth_out << '\n';
    return 0;
  }

  if (*parc) {
    if (parc_scales.empty()) return usage("parcellate needs --regions or --scales");
    const int rc = check(ctx, cx_parcellate(ctx, parc_mask.c_str(), parc_scales.data(), parc_scales.size(),
                                            parc_seeds.data(), parc_seeds.size(), parc_count, parc_check ? 1 : 0,
                                            parc_out.c_str()));
    if (rc) return rc;
    const std::size_t per = parc_seeds.empty() ? static_cast<std::size_t>(parc_count) : parc_seeds.size();
    std::cout << "wrote " << per * parc_scales.size() << " parcellations to " << parc_out << '\n';
    return 0;
  }

  if (*ext) {
    if (int rc = check(ctx, cx_extract(ctx, ext_manifest.c_str(), ext_parc.c_str(), ext_kind.c_str(),
                                       ext_mask.empty() ? nullptr : ext_mask.c_str(), ext_scrub, ext_out.c_str())))
      return rc;
    std::cout << "wrote " << ext_out << '\n';
    return 0;
  }

  if (*tr) {
    if (tr_print) {
      OwnedString s;
      if (int rc = check(ctx, cx_train_default_config(ctx, tr_model.c_str(), tr_task.c_str(), &s.p))) return rc;
      std::cout << s.str();
      return 0;
    }
    if (tr_features.empty()) return usage("train needs --features");
    if (tr_out.empty()) return usage("train needs --out");
    std::string text;
    if (!tr_config.empty() && !read_file(tr_config, text)) return usage("cannot read " + tr_config);
    if (int rc = check(ctx, cx_train(ctx, tr_model.c_str(), tr_task.c_str(), tr_features.c_str(),
                                     text.empty() ? nullptr : text.c_str(), tr_out.c_str())))
      return rc;
    std::cout << "wrote " << tr_out << '\n';
    return 0;
  }

  if (*pr) {
    if (int rc = check(ctx, cx_predict(ctx, pr_ckpt.c_str(), pr_features.c_str(), pr_out.c_str()))) return rc;
    std::cout << "wrote " << pr_out << '\n';
    return 0;
  }

  if (*ens) {
    if (!ens_preds.empty()) {
      const auto p = c_strings(ens_preds);
      if (int rc = check(ctx, cx_fuse_predictions(ctx, p.data(), p.size(), ens_out.c_str()))) return rc;
    } else {
      if (ens_ckpts.empty()) return usage("ensemble-predict needs --checkpoints or --predictions");
      if (!pair_up(ens_features, ens_ckpts.size()))
        return usage("--features needs one directory per checkpoint or a single shared one");
      const auto cp = c_strings(ens_ckpts);
      const auto fp = c_strings(ens_features);
      if (int rc = check(ctx, cx_ensemble_predict(ctx, cp.data(), fp.data(), cp.size(), ens_out.c_str()))) return rc;
    }
    std::cout << "wrote " << ens_out << '\n';
    return 0;
  }

  if (*ev) {
    OwnedString js, txt;
    if (int rc = check(ctx, cx_evaluate(ctx, ev_preds.c_str(), &js.p, &txt.p))) return rc;
    std::cout << txt.str();
    if (!ev_out.empty()) {
      std::ofstream os(ev_out);
      if (!(os << js.str())) return usage("cannot write " + ev_out);
    }
    return 0;
  }

  if (*bs) {
    OwnedString s;
    if (int rc = check(ctx, cx_bootstrap(ctx, bs_a.c_str(), bs_b.c_str(), bs_metric.c_str(), bs_reps, bs_out.c_str(),
                                         &s.p)))
      return rc;
    std::cout << s.str() << '\n';
    return 0;
  }

  if (*sal) {
    if (!pair_up(sal_features, sal_ckpts.size()))
      return usage("--features needs one directory per checkpoint or a single shared one");
    const auto cp = c_strings(sal_ckpts);
    const auto fp = c_strings(sal_features);
    const auto sp = c_strings(sal_subjects);
    if (int rc = check(ctx, cx_saliency(ctx, cp.data(), fp.data(), cp.size(), sp.data(), sp.size(), sal_out.c_str())))
      return rc;
    std::cout << "wrote " << sal_out << '\n';
    return 0;
  }
  return usage("no subcommand");
}
