#include "connectome/connectome.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "connectome/error.hpp"
#include "connectome/pipeline.hpp"
#include "connectome/synth.hpp"
#include "connectome/volume_io.hpp"

struct cx_context {
  connectome::RunContext run;
  std::string error;
  std::optional<connectome::RunRecord> last;
};

struct cx_volume {
  connectome::Volume volume;
};

struct cx_model {
  connectome::Model model;
};

namespace {

using namespace connectome;
namespace fs = std::filesystem;

cx_status to_status(Errc c) {
  switch (c) {
    case Errc::invalid_argument:
      return CX_INVALID_ARGUMENT;
    case Errc::io:
      return CX_IO;
    case Errc::format:
      return CX_FORMAT;
    case Errc::shape:
      return CX_SHAPE;
    case Errc::numeric:
      return CX_NUMERIC;
    case Errc::not_converged:
      return CX_NOT_CONVERGED;
    case Errc::internal:
      return CX_INTERNAL;
  }
  return CX_INTERNAL;
}

template <typename F>
cx_status guarded(cx_context* ctx, F&& f) {
  if (!ctx) return CX_INVALID_ARGUMENT;
  try {
    f();
    ctx->error.clear();
    return CX_OK;
  } catch (const Error& e) {
    ctx->error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    ctx->error = "out of memory";
    return CX_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    ctx->error = e.what();
    return CX_IO;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return CX_INTERNAL;
  }
}

std::string need(const char* s, const char* name) {
  require(s != nullptr && *s != '\0', Errc::invalid_argument, std::string(name) + " is required");
  return s;
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

Task task_arg(const char* s) {
  const std::string t = need(s, "task");
  if (t == "cls") return Task::classification;
  if (t == "reg") return Task::regression;
  return task_from_string(t);
}

std::vector<std::pair<fs::path, fs::path>> pairs(const char* const* a, const char* const* b, size_t n) {
  require(n > 0 && a && b, Errc::invalid_argument, "no members given");
  std::vector<std::pair<fs::path, fs::path>> out;
  for (size_t i = 0; i < n; ++i) out.emplace_back(need(a[i], "checkpoint"), need(b[i], "features directory"));
  return out;
}

}  // namespace

extern "C" {

const char* cx_version(void) { return "1.0.0"; }

const char* cx_status_string(cx_status s) {
  switch (s) {
    case CX_OK:
      return "ok";
    case CX_INVALID_ARGUMENT:
      return "invalid argument";
    case CX_IO:
      return "i/o error";
    case CX_FORMAT:
      return "format error";
    case CX_SHAPE:
      return "shape mismatch";
    case CX_NUMERIC:
      return "numeric error";
    case CX_NOT_CONVERGED:
      return "not converged";
    case CX_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

cx_status cx_context_create(cx_context** out) {
  if (!out) return CX_INVALID_ARGUMENT;
  *out = new (std::nothrow) cx_context();
  return *out ? CX_OK : CX_INTERNAL;
}

void cx_context_destroy(cx_context* ctx) { delete ctx; }

const char* cx_last_error(const cx_context* ctx) { return ctx ? ctx->error.c_str() : "no context"; }

cx_status cx_context_set_jobs(cx_context* ctx, int jobs) {
  return guarded(ctx, [&] {
    require(jobs >= 1, Errc::invalid_argument, "jobs must be >= 1");
    ctx->run.jobs = jobs;
  });
}

cx_status cx_context_set_seed(cx_context* ctx, uint64_t seed) {
  return guarded(ctx, [&] { ctx->run.seed = seed; });
}

cx_status cx_context_clear_seed(cx_context* ctx) {
  return guarded(ctx, [&] { ctx->run.seed.reset(); });
}

cx_status cx_context_set_command_line(cx_context* ctx, const char* command_line) {
  return guarded(ctx, [&] { ctx->run.command_line = command_line ? command_line : ""; });
}

cx_status cx_last_run_record(cx_context* ctx, char** json) {
  return guarded(ctx, [&] {
    require(json != nullptr, Errc::invalid_argument, "null output");
    require(ctx->last.has_value(), Errc::invalid_argument, "no command has run");
    *json = dup(ctx->last->to_json());
  });
}

void cx_string_free(char* s) { std::free(s); }

cx_status cx_synth_default_config(cx_context* ctx, char** json) {
  return guarded(ctx, [&] {
    require(json != nullptr, Errc::invalid_argument, "null output");
    *json = dup(SynthConfig{}.to_json());
  });
}

cx_status cx_synth_generate(cx_context* ctx, const char* config_json, const char* out_dir) {
  return guarded(ctx, [&] {
    ctx->last = cmd_synth_gen(ctx->run, config_json ? config_json : "", need(out_dir, "output directory"));
  });
}

cx_status cx_parcellate(cx_context* ctx, const char* mask_path, const int* scales, size_t n_scales,
                        const uint64_t* seeds, size_t n_seeds, int count, int check, const char* out_dir) {
  return guarded(ctx, [&] {
    require(scales != nullptr && n_scales > 0, Errc::invalid_argument, "no region counts given");
    require(n_seeds == 0 || seeds != nullptr, Errc::invalid_argument, "null seed list");
    ParcellateOptions o;
    o.mask = need(mask_path, "mask");
    o.scales.assign(scales, scales + n_scales);
    if (n_seeds) o.seeds.assign(seeds, seeds + n_seeds);
    o.count = count;
    o.check = check != 0;
    o.out = need(out_dir, "output directory");
    ctx->last = cmd_parcellate(ctx->run, o);
  });
}

cx_status cx_extract(cx_context* ctx, const char* manifest, const char* parcellation, const char* kind,
                     const char* mask_path, double scrub_threshold, const char* out_dir) {
  return guarded(ctx, [&] {
    ExtractOptions o;
    o.manifest = need(manifest, "manifest");
    o.parcellation = need(parcellation, "parcellation");
    o.kind = feature_kind_from_string(need(kind, "feature kind"));
    if (mask_path && *mask_path) o.mask = fs::path(mask_path);
    o.scrub_threshold = scrub_threshold;
    o.out = need(out_dir, "output directory");
    ctx->last = cmd_extract(ctx->run, o);
  });
}

cx_status cx_train_default_config(cx_context* ctx, const char* family, const char* task, char** json) {
  return guarded(ctx, [&] {
    require(json != nullptr, Errc::invalid_argument, "null output");
    *json = dup(default_train_settings(family_from_string(need(family, "model")), task_arg(task)).to_json());
  });
}

cx_status cx_train(cx_context* ctx, const char* family, const char* task, const char* features_dir,
                   const char* config_json, const char* out_checkpoint) {
  return guarded(ctx, [&] {
    TrainOptions o;
    o.family = family_from_string(need(family, "model"));
    o.task = task_arg(task);
    o.features = need(features_dir, "features directory");
    o.config_json = config_json ? config_json : "";
    o.out = need(out_checkpoint, "output checkpoint");
    ctx->last = cmd_train(ctx->run, o);
  });
}

cx_status cx_predict(cx_context* ctx, const char* checkpoint, const char* features_dir, const char* out_json) {
  return guarded(ctx, [&] {
    ctx->last = cmd_predict(ctx->run, need(checkpoint, "checkpoint"), need(features_dir, "features directory"),
                            need(out_json, "output file"));
  });
}

cx_status cx_ensemble_predict(cx_context* ctx, const char* const* checkpoints, const char* const* features_dirs,
                              size_t n, const char* out_json) {
  return guarded(ctx, [&] {
    ctx->last = cmd_ensemble_predict(ctx->run, pairs(checkpoints, features_dirs, n), need(out_json, "output file"));
  });
}

cx_status cx_fuse_predictions(cx_context* ctx, const char* const* predictions, size_t n, const char* out_json) {
  return guarded(ctx, [&] {
    require(predictions != nullptr && n > 0, Errc::invalid_argument, "no prediction files given");
    std::vector<fs::path> in;
    for (size_t i = 0; i < n; ++i) in.emplace_back(need(predictions[i], "prediction file"));
    ctx->last = cmd_fuse_predictions(ctx->run, in, need(out_json, "output file"));
  });
}

cx_status cx_evaluate(cx_context* ctx, const char* predictions, char** report_json, char** report_text) {
  return guarded(ctx, [&] {
    const auto rep = evaluate(read_predictions(need(predictions, "prediction file")));
    char* j = report_json ? dup(report_to_json(rep)) : nullptr;
    if (report_text) {
      try {
        *report_text = dup(report_to_text(rep));
      } catch (...) {
        std::free(j);
        throw;
      }
    }
    if (report_json) *report_json = j;
  });
}

cx_status cx_bootstrap(cx_context* ctx, const char* predictions_a, const char* predictions_b, const char* metric,
                       int replicates, const char* out_dir, char** summary_json) {
  return guarded(ctx, [&] {
    BootstrapOptions o;
    o.a = need(predictions_a, "predictions A");
    o.b = need(predictions_b, "predictions B");
    o.metric = metric_from_string(need(metric, "metric"));
    o.replicates = replicates;
    o.out = need(out_dir, "output directory");
    BootstrapResult res;
    ctx->last = cmd_bootstrap(ctx->run, o, &res);
    if (summary_json) {
      nlohmann::json s{{"metric", to_string(res.metric)},
                       {"full_sample_difference", res.full_sample_difference},
                       {"fraction_a_worse", res.fraction_a_worse},
                       {"replicates", res.differences.size()},
                       {"redraws", res.redraws}};
      *summary_json = dup(s.dump());
    }
  });
}

cx_status cx_saliency(cx_context* ctx, const char* const* checkpoints, const char* const* features_dirs, size_t n,
                      const char* const* subjects, size_t n_subjects, const char* out_dir) {
  return guarded(ctx, [&] {
    SaliencyOptions o;
    o.members = pairs(checkpoints, features_dirs, n);
    require(n_subjects == 0 || subjects != nullptr, Errc::invalid_argument, "null subject list");
    for (size_t i = 0; i < n_subjects; ++i) o.subjects.push_back(need(subjects[i], "subject id"));
    o.out = need(out_dir, "output directory");
    ctx->last = cmd_saliency(ctx->run, o);
  });
}

cx_status cx_volume_read(cx_context* ctx, const char* path, cx_volume** out) {
  return guarded(ctx, [&] {
    require(out != nullptr, Errc::invalid_argument, "null output");
    *out = new cx_volume{read_volume(need(path, "path"))};
  });
}

void cx_volume_free(cx_volume* v) { delete v; }

const char* cx_volume_kind(const cx_volume* v) { return v ? to_string(kind_of(v->volume)) : ""; }

void cx_volume_dims(const cx_volume* v, int dims[3]) {
  if (!v || !dims) return;
  const auto& d = std::visit([](const auto& x) -> const GridMeta& { return x.meta; }, v->volume).dims;
  for (int a = 0; a < 3; ++a) dims[a] = d[a];
}

int cx_volume_channels(const cx_volume* v) {
  if (!v) return 0;
  if (const auto* b = std::get_if<BoldVolume>(&v->volume)) return b->num_frames;
  if (const auto* f = std::get_if<FingerprintVolume>(&v->volume)) return f->channels;
  if (const auto* r = std::get_if<RealVolume>(&v->volume)) return r->channels;
  return 1;
}

size_t cx_volume_size(const cx_volume* v) {
  return v ? std::visit([](const auto& x) { return x.data.size(); }, v->volume) : 0;
}

cx_status cx_volume_copy(cx_context* ctx, const cx_volume* v, double* out, size_t n) {
  return guarded(ctx, [&] {
    require(v != nullptr && out != nullptr, Errc::invalid_argument, "null argument");
    std::visit(
        [&](const auto& x) {
          require(n == x.data.size(), Errc::shape,
                  "buffer holds " + std::to_string(n) + " values, volume has " + std::to_string(x.data.size()));
          for (size_t i = 0; i < n; ++i) out[i] = static_cast<double>(x.data[i]);
        },
        v->volume);
  });
}

cx_status cx_model_load(cx_context* ctx, const char* path, cx_model** out) {
  return guarded(ctx, [&] {
    require(out != nullptr, Errc::invalid_argument, "null output");
    *out = new cx_model{load_checkpoint(need(path, "path"))};
  });
}

void cx_model_free(cx_model* m) { delete m; }

size_t cx_model_input_size(const cx_model* m) {
  if (!m) return 0;
  if (const auto* r = std::get_if<RidgeModel>(&m->model)) return r->weights.size();
  return nn::shape_size(std::get<NetModel>(m->model).net.input_shape());
}

cx_status cx_model_describe(cx_context* ctx, const cx_model* m, char** json) {
  return guarded(ctx, [&] {
    require(m != nullptr && json != nullptr, Errc::invalid_argument, "null argument");
    nlohmann::json j{{"family", to_string(family_of(m->model))},
                     {"task", to_string(task_of(m->model))},
                     {"parcellation_id", parcellation_of(m->model)},
                     {"input_size", cx_model_input_size(m)}};
    if (const auto* n = std::get_if<NetModel>(&m->model)) {
      j["input_shape"] = n->net.input_shape();
      j["parameters"] = n->net.parameter_count();
    } else {
      j["alpha"] = std::get<RidgeModel>(m->model).alpha;
    }
    *json = dup(j.dump());
  });
}

cx_status cx_model_predict(cx_context* ctx, cx_model* m, const float* x, size_t n_samples, double* out) {
  return guarded(ctx, [&] {
    require(m != nullptr && out != nullptr && (x != nullptr || n_samples == 0), Errc::invalid_argument,
            "null argument");
    Dataset d;
    if (const auto* n = std::get_if<NetModel>(&m->model))
      d.sample_shape = n->net.input_shape();
    else
      d.sample_shape = {std::get<RidgeModel>(m->model).weights.size()};
    d.x.assign(x, x + n_samples * d.sample_size());
    d.y.assign(n_samples, 0.0);
    const auto p = predict(m->model, d);
    std::copy(p.begin(), p.end(), out);
  });
}

}  // extern "C"
