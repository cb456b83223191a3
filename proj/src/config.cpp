#include "gazemae/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "gazemae/errors.hpp"

namespace gazemae {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ValidationError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (trim(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  bad_value(key, value, "a number");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (trim(value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  bad_value(key, value, "an integer");
}

std::vector<double> parse_list(const std::string& key, std::string value, std::size_t count,
                               bool bracketed) {
  value = trim(value);
  if (bracketed) {
    if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
      bad_value(key, value, "a bracketed list like [a, b]");
    }
    value = value.substr(1, value.size() - 2);
  }
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::size_t end = comma == std::string::npos ? value.size() : comma;
    const std::string field = trim(value.substr(start, end - start));
    if (field.empty()) bad_value(key, value, "a comma-separated list");
    out.push_back(parse_double(key, field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != count) {
    bad_value(key, value, "a list of " + std::to_string(count) + " numbers");
  }
  return out;
}

// Shortest round-trip formatting so the echo both reads naturally and
// reparses to the identical double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  auto int_field = [](const char* sec, const char* key, int RunConfig::* member) {
    return Field{sec, key,
                 [key, member](RunConfig& c, const std::string& v) {
                   c.*member = static_cast<int>(parse_int(key, v));
                 },
                 [member](const RunConfig& c) { return fmt_int(c.*member); }};
  };
  auto double_field = [](const char* sec, const char* key, double RunConfig::* member) {
    return Field{sec, key,
                 [key, member](RunConfig& c, const std::string& v) {
                   c.*member = parse_double(key, v);
                 },
                 [member](const RunConfig& c) { return fmt_double(c.*member); }};
  };
  auto string_field = [](const char* sec, const char* key, std::string RunConfig::* member) {
    return Field{sec, key,
                 [member](RunConfig& c, const std::string& v) { c.*member = trim(v); },
                 [member](const RunConfig& c) { return c.*member; }};
  };
  auto triple_field = [](const char* sec, const char* key,
                         std::array<double, 3> RunConfig::* member) {
    return Field{sec, key,
                 [key, member](RunConfig& c, const std::string& v) {
                   const auto list = parse_list(key, v, 3, false);
                   c.*member = {list[0], list[1], list[2]};
                 },
                 [member](const RunConfig& c) {
                   const auto& a = c.*member;
                   return fmt_double(a[0]) + ", " + fmt_double(a[1]) + ", " + fmt_double(a[2]);
                 }};
  };
  auto range_field = [](const char* sec, const char* key, double RunConfig::* lo,
                        double RunConfig::* hi) {
    return Field{sec, key,
                 [key, lo, hi](RunConfig& c, const std::string& v) {
                   const auto list = parse_list(key, v, 2, true);
                   c.*lo = list[0];
                   c.*hi = list[1];
                 },
                 [lo, hi](const RunConfig& c) {
                   return "[" + fmt_double(c.*lo) + ", " + fmt_double(c.*hi) + "]";
                 }};
  };

  static const std::vector<Field> table = {
      // [data]
      string_field("data", "root", &RunConfig::root),
      Field{"data", "seed",
            [](RunConfig& c, const std::string& v) {
              c.seed = static_cast<std::uint64_t>(parse_int("seed", v));
            },
            [](const RunConfig& c) { return fmt_int(static_cast<std::int64_t>(c.seed)); }},
      int_field("data", "workers", &RunConfig::workers),
      int_field("data", "n_clips", &RunConfig::n_clips),
      int_field("data", "frames_per_clip", &RunConfig::frames_per_clip),
      int_field("data", "raw_image_size", &RunConfig::raw_image_size),
      double_field("data", "imbalance_ratio", &RunConfig::imbalance_ratio),
      double_field("data", "motion_jitter_px", &RunConfig::motion_jitter_px),
      double_field("data", "frame_label_flip_prob", &RunConfig::frame_label_flip_prob),
      // [windowing]
      int_field("windowing", "Resolution", &RunConfig::resolution),
      int_field("windowing", "stride_train", &RunConfig::stride_train),
      int_field("windowing", "stride_val", &RunConfig::stride_val),
      int_field("windowing", "stride_test", &RunConfig::stride_test),
      int_field("windowing", "half_window", &RunConfig::half_window),
      // [augment]
      range_field("augment", "Scale", &RunConfig::scale_min, &RunConfig::scale_max),
      range_field("augment", "Jitter aspect ratio", &RunConfig::ratio_min, &RunConfig::ratio_max),
      double_field("augment", "Color jitter", &RunConfig::color_jitter),
      string_field("augment", "Rand augment", &RunConfig::rand_augment),
      // [model]
      string_field("model", "variant", &RunConfig::variant),
      int_field("model", "patch_size", &RunConfig::patch_size),
      int_field("model", "tubelet_size", &RunConfig::tubelet_size),
      int_field("model", "embed_dim", &RunConfig::embed_dim),
      int_field("model", "depth", &RunConfig::depth),
      int_field("model", "heads", &RunConfig::heads),
      int_field("model", "decoder_dim", &RunConfig::decoder_dim),
      int_field("model", "decoder_depth", &RunConfig::decoder_depth),
      double_field("model", "mask_ratio", &RunConfig::mask_ratio),
      triple_field("model", "pixel_mean", &RunConfig::pixel_mean),
      triple_field("model", "pixel_std", &RunConfig::pixel_std),
      // [optim]
      string_field("optim", "Optimizer", &RunConfig::optimizer_name),
      Field{"optim", "Momentum",
            [](RunConfig& c, const std::string& v) {
              const auto list = parse_list("Momentum", v, 2, false);
              c.beta1 = list[0];
              c.beta2 = list[1];
            },
            [](const RunConfig& c) { return fmt_double(c.beta1) + ", " + fmt_double(c.beta2); }},
      double_field("optim", "Weight decay", &RunConfig::weight_decay),
      int_field("optim", "Batch size", &RunConfig::batch_size),
      int_field("optim", "accum_steps", &RunConfig::accum_steps),
      // [schedule]
      string_field("schedule", "Learning rate schedule", &RunConfig::schedule_name),
      double_field("schedule", "Start learning rate", &RunConfig::start_lr),
      double_field("schedule", "Learning rate", &RunConfig::peak_lr),
      double_field("schedule", "End learning rate", &RunConfig::end_lr),
      int_field("schedule", "Warmup epoch", &RunConfig::warmup_epochs),
      int_field("schedule", "Epochs", &RunConfig::epochs),
  };
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

SamplingSpec RunConfig::sampling(int stride) const {
  SamplingSpec spec;
  spec.stride = stride;
  spec.half_window = half_window;
  spec.resolution = resolution;
  return spec;
}

int RunConfig::stride_for_split(const std::string& split) const {
  if (split == "train") return stride_train;
  if (split == "val") return stride_val;
  if (split == "test") return stride_test;
  throw ValidationError("unknown split '" + split + "' (expected train, val or test)");
}

AugmentPolicy RunConfig::augment_policy() const {
  AugmentPolicy policy;
  policy.scale_min = scale_min;
  policy.scale_max = scale_max;
  policy.ratio_min = ratio_min;
  policy.ratio_max = ratio_max;
  policy.color_jitter = color_jitter;
  policy.rand_augment = decode_randaugment_spec(rand_augment);
  return policy;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig cfg;
  cfg.image_size = resolution;
  cfg.patch_size = patch_size;
  cfg.tubelet_size = tubelet_size;
  cfg.frames = 2 * half_window + 1;
  cfg.embed_dim = embed_dim;
  cfg.depth = depth;
  cfg.heads = heads;
  cfg.decoder_dim = decoder_dim;
  cfg.decoder_depth = decoder_depth;
  cfg.mask_ratio = mask_ratio;
  cfg.variant = variant;
  cfg.pixel_mean = pixel_mean;
  cfg.pixel_std = pixel_std;
  return cfg;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec spec;
  spec.n_clips = n_clips;
  spec.frames_per_clip = frames_per_clip;
  spec.image_size = raw_image_size;
  spec.imbalance_ratio = imbalance_ratio;
  spec.motion_jitter_px = motion_jitter_px;
  spec.frame_label_flip_prob = frame_label_flip_prob;
  spec.seed = derive_seed(seed, "synth");
  return spec;
}

OptimizerSpec RunConfig::optimizer_spec() const {
  OptimizerSpec spec;
  spec.beta1 = beta1;
  spec.beta2 = beta2;
  spec.weight_decay = weight_decay;
  return spec;
}

ScheduleSpec RunConfig::schedule_spec() const {
  ScheduleSpec spec;
  spec.start_lr = start_lr;
  spec.peak_lr = peak_lr;
  spec.end_lr = end_lr;
  spec.warmup_epochs = warmup_epochs;
  spec.total_epochs = epochs;
  spec.steps_per_epoch = 1;
  return spec;
}

void RunConfig::validate() const {
  if (root.empty()) throw ValidationError("config: data.root must not be empty");
  if (workers < 1) throw ValidationError("config: data.workers must be >= 1");
  if (optimizer_name != "AdamW") {
    throw ValidationError("config: Optimizer must be 'AdamW', got '" + optimizer_name + "'");
  }
  if (schedule_name != "cosine") {
    throw ValidationError("config: Learning rate schedule must be 'cosine', got '" +
                          schedule_name + "'");
  }
  if (batch_size < 1) throw ValidationError("config: Batch size must be >= 1");
  if (accum_steps < 1 || batch_size % accum_steps != 0) {
    throw ValidationError("config: accum_steps must be >= 1 and divide Batch size");
  }
  for (int stride : {stride_train, stride_val, stride_test}) {
    if (stride < 1) throw ValidationError("config: strides must be >= 1");
  }
  synth_spec().validate();
  sampling(stride_train).validate();
  augment_policy().validate();
  model_config().validate();
  optimizer_spec().validate();
  schedule_spec().validate();
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ValidationError("config line " + std::to_string(line_no) + ": malformed section");
      }
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& f : fields()) {
        if (section == f.section) {
          known = true;
          break;
        }
      }
      if (!known) {
        throw ValidationError("config line " + std::to_string(line_no) + ": unknown section [" +
                              section + "]");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": key outside any [section]");
    }
    const Field* field = find_field(section, key);
    if (!field) {
      throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                            "' in section [" + section + "]");
    }
    field->set(config, value);
  }
  return config;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("--set expects 'section.key=value', got '" + assignment + "'");
  }
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const std::size_t dot = path.find('.');
  if (dot == std::string::npos) {
    throw ValidationError("--set expects 'section.key=value', got '" + assignment + "'");
  }
  const std::string section = trim(path.substr(0, dot));
  const std::string key = trim(path.substr(dot + 1));
  const Field* field = find_field(section, key);
  if (!field) {
    throw ValidationError("--set: unknown config key '" + section + "." + key + "'");
  }
  field->set(config, value);
}

std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

void write_config_echo(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config echo: " + path.string());
  out << render_config(config);
}

}  // namespace gazemae
