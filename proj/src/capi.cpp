#include "ncsr/ncsr.h"

#include <cstring>
#include <memory>
#include <string>

#include "ncsr/checkpoint.hpp"
#include "ncsr/commands.hpp"
#include "ncsr/image_io.hpp"
#include "ncsr/verify.hpp"

struct ncsr_model {
  std::unique_ptr<ncsr::NcsrModel> model;
};

struct ncsr_image {
  ncsr::Tensor t;
};

struct ncsr_report {
  ncsr::MetricsReport report;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

ncsr_status fail(ncsr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
ncsr_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return NCSR_OK;
  } catch (const ncsr::Error& e) {
    return fail(static_cast<ncsr_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(NCSR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NCSR_ERR_INTERNAL, e.what());
  }
}

bool null_arg(const void* p, const char* name) {
  if (p) return false;
  g_last_error = std::string(name) + " must not be NULL";
  return true;
}

}  // namespace

extern "C" {

NCSR_API const char* ncsr_last_error(void) { return g_last_error.c_str(); }

NCSR_API const char* ncsr_status_name(ncsr_status status) {
  switch (status) {
    case NCSR_OK: return "ok";
    case NCSR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NCSR_ERR_SHAPE: return "shape error";
    case NCSR_ERR_SINGULAR: return "singular matrix";
    case NCSR_ERR_NUMERIC: return "non-finite value";
    case NCSR_ERR_CONFIG: return "configuration error";
    case NCSR_ERR_IO: return "i/o error";
    case NCSR_ERR_FORMAT: return "format error";
    case NCSR_ERR_TRAINING_ABORTED: return "training aborted";
    case NCSR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

NCSR_API const char* ncsr_version(void) { return ncsr::version_string(); }
NCSR_API const char* ncsr_build_id(void) { return ncsr::build_id(); }

NCSR_API ncsr_status ncsr_image_load_png(const char* path, ncsr_image** out) {
  if (null_arg(path, "path") || null_arg(out, "out")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] { *out = new ncsr_image{ncsr::load_png(path)}; });
}

NCSR_API ncsr_status ncsr_image_save_png(const ncsr_image* img, const char* path) {
  if (null_arg(img, "img") || null_arg(path, "path")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] { ncsr::save_png(path, img->t); });
}

NCSR_API ncsr_status ncsr_image_size(const ncsr_image* img, int64_t* height, int64_t* width) {
  if (null_arg(img, "img") || null_arg(height, "height") || null_arg(width, "width")) {
    return NCSR_ERR_INVALID_ARGUMENT;
  }
  *height = img->t.shape().h;
  *width = img->t.shape().w;
  return NCSR_OK;
}

NCSR_API void ncsr_image_free(ncsr_image* img) { delete img; }

NCSR_API ncsr_status ncsr_model_load(const char* checkpoint_path, ncsr_model** out) {
  if (null_arg(checkpoint_path, "checkpoint_path") || null_arg(out, "out")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] { *out = new ncsr_model{ncsr::load_checkpoint(checkpoint_path).model}; });
}

NCSR_API ncsr_status ncsr_model_scale(const ncsr_model* model, int* scale) {
  if (null_arg(model, "model") || null_arg(scale, "scale")) return NCSR_ERR_INVALID_ARGUMENT;
  *scale = model->model->config().scale;
  return NCSR_OK;
}

NCSR_API ncsr_status ncsr_model_sample(const ncsr_model* model, const ncsr_image* lr, double temperature,
                                       uint64_t seed, int n, ncsr_image** out) {
  if (null_arg(model, "model") || null_arg(lr, "lr") || null_arg(out, "out")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    ncsr::Rng rng(seed);
    auto samples = model->model->sample(lr->t, temperature, rng, n);
    for (int i = 0; i < n; ++i) out[i] = new ncsr_image{std::move(samples[static_cast<size_t>(i)])};
  });
}

NCSR_API void ncsr_model_free(ncsr_model* model) { delete model; }

NCSR_API ncsr_status ncsr_train(const char* config_path, ncsr_log_fn log, void* user) {
  if (null_arg(config_path, "config_path")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    ncsr::cmd_train(config_path, [&](const std::string& line) {
      if (log) log(line.c_str(), user);
    });
  });
}

NCSR_API ncsr_status ncsr_sample(const char* checkpoint_path, const char* lr_png, int n, double temperature,
                                 uint64_t seed, const char* out_dir) {
  if (null_arg(checkpoint_path, "checkpoint_path") || null_arg(lr_png, "lr_png") || null_arg(out_dir, "out_dir")) {
    return NCSR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { ncsr::cmd_sample(checkpoint_path, lr_png, n, temperature, seed, out_dir); });
}

NCSR_API ncsr_status ncsr_eval(const char* checkpoint_path, const char* manifest, int n, double temperature,
                               uint64_t seed, const char* out_dir, int threads, ncsr_report** out) {
  if (null_arg(checkpoint_path, "checkpoint_path") || null_arg(manifest, "manifest") || null_arg(out, "out")) {
    return NCSR_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    auto r = std::make_unique<ncsr_report>();
    r->report = ncsr::cmd_eval(checkpoint_path, manifest, n, temperature, seed, out_dir ? out_dir : "",
                               threads > 0 ? threads : ncsr::env_threads());
    r->summary = r->report.summary();
    *out = r.release();
  });
}

NCSR_API ncsr_status ncsr_verify(int full, uint64_t seed, int inject_fault, ncsr_log_fn log, void* user,
                                 int* all_passed) {
  if (null_arg(all_passed, "all_passed")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    ncsr::VerifyOptions opt;
    opt.full = full != 0;
    opt.seed = seed;
    opt.inject_singular_1x1 = inject_fault != 0;
    const auto results = ncsr::run_verify(opt, [&](const ncsr::PropertyResult& r) {
      if (log) log(ncsr::format_property(r).c_str(), user);
    });
    *all_passed = 1;
    for (const auto& r : results) {
      if (!r.pass) *all_passed = 0;
    }
  });
}

NCSR_API ncsr_status ncsr_synth_data(const char* config_path, const char* out_dir, size_t* n_written) {
  if (null_arg(config_path, "config_path") || null_arg(out_dir, "out_dir")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    const auto entries = ncsr::cmd_synth_data(config_path, out_dir);
    if (n_written) *n_written = entries.size();
  });
}

NCSR_API const char* ncsr_report_summary(const ncsr_report* report) { return report ? report->summary.c_str() : ""; }

NCSR_API size_t ncsr_report_image_count(const ncsr_report* report) { return report ? report->report.rows.size() : 0; }

NCSR_API size_t ncsr_report_failure_count(const ncsr_report* report) {
  return report ? report->report.failures.size() : 0;
}

NCSR_API const char* ncsr_report_failure(const ncsr_report* report, size_t i) {
  if (!report || i >= report->report.failures.size()) return "";
  return report->report.failures[i].c_str();
}

NCSR_API void ncsr_report_free(ncsr_report* report) { delete report; }

NCSR_API ncsr_status ncsr_file_hash(const char* path, char out[17]) {
  if (null_arg(path, "path") || null_arg(out, "out")) return NCSR_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    const std::string h = ncsr::content_hash(ncsr::read_file(path));
    std::memcpy(out, h.c_str(), 17);
  });
}

}  // extern "C"
