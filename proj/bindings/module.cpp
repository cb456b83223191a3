#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gazemae/annotations.hpp"
#include "gazemae/errors.hpp"
#include "gazemae/augment.hpp"
#include "gazemae/config.hpp"
#include "gazemae/eval.hpp"
#include "gazemae/model.hpp"
#include "gazemae/optim.hpp"
#include "gazemae/pipeline.hpp"
#include "gazemae/synth.hpp"
#include "gazemae/windowing.hpp"

namespace py = pybind11;
using namespace gazemae;

namespace {

VideoTensorD window_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 4 || arr.shape(3) != 3) {
    throw ValidationError("window array must have shape (T, H, W, 3)");
  }
  VideoTensorD w = VideoTensorD::zeros(static_cast<int>(arr.shape(0)),
                                       static_cast<int>(arr.shape(1)),
                                       static_cast<int>(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), w.data.begin());
  return w;
}

py::array_t<float> image_to_numpy(const Image& img) {
  py::array_t<float> out({img.height, img.width, 3});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Image image_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw ValidationError("image array must have shape (H, W, 3)");
  }
  Image img = Image::zeros(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
  return img;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Eye-contact classification pipeline: windowing, augmentation, "
            "video-MAE model, training schedule and metrics.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  // ----- annotations -------------------------------------------------------
  py::class_<BBox>(m, "BBox")
      .def(py::init<double, double, double, double>(), py::arg("x"), py::arg("y"), py::arg("w"),
           py::arg("h"))
      .def_readwrite("x", &BBox::x)
      .def_readwrite("y", &BBox::y)
      .def_readwrite("w", &BBox::w)
      .def_readwrite("h", &BBox::h)
      .def("__repr__", [](const BBox& b) {
        std::ostringstream os;
        os << "BBox(x=" << b.x << ", y=" << b.y << ", w=" << b.w << ", h=" << b.h << ")";
        return os.str();
      });

  py::class_<AnnotationRecord>(m, "AnnotationRecord")
      .def(py::init([](std::string clip_id, std::int64_t frame_index, std::string face_id,
                       const BBox& bbox, int label) {
             AnnotationRecord rec;
             rec.clip_id = std::move(clip_id);
             rec.frame_index = frame_index;
             rec.face_id = std::move(face_id);
             rec.bbox = bbox;
             rec.label = label;
             return rec;
           }),
           py::arg("clip_id"), py::arg("frame_index"), py::arg("face_id"), py::arg("bbox"),
           py::arg("label"))
      .def_readwrite("clip_id", &AnnotationRecord::clip_id)
      .def_readwrite("frame_index", &AnnotationRecord::frame_index)
      .def_readwrite("face_id", &AnnotationRecord::face_id)
      .def_readwrite("bbox", &AnnotationRecord::bbox)
      .def_readwrite("label", &AnnotationRecord::label)
      .def("__eq__", [](const AnnotationRecord& a, const AnnotationRecord& b) { return a == b; });

  py::class_<FaceTrack>(m, "FaceTrack")
      .def_readonly("clip_id", &FaceTrack::clip_id)
      .def_readonly("face_id", &FaceTrack::face_id)
      .def_readonly("records", &FaceTrack::records);

  m.def("parse_annotations", [](const std::string& text) {
    std::istringstream in(text);
    return parse_annotations(in);
  },
        py::arg("text"), "Parse JSON-lines annotation text into records.");
  m.def("parse_annotations_file", &parse_annotations_file, py::arg("path"));
  m.def("serialize_annotations", [](const std::vector<AnnotationRecord>& records) {
    std::ostringstream out;
    serialize_annotations(out, records);
    return out.str();
  },
        py::arg("records"));
  m.def("group_tracks", &group_tracks, py::arg("records"));
  m.def("dataset_stats", [](const std::vector<FaceTrack>& tracks) {
    const auto report = dataset_stats(tracks);
    py::dict d;
    d["n_positive"] = report.n_positive;
    d["n_negative"] = report.n_negative;
    d["ratio_neg_to_pos"] =
        report.ratio_neg_to_pos ? py::object(py::float_(*report.ratio_neg_to_pos)) : py::none();
    d["n_clips"] = report.n_clips;
    d["n_tracks"] = report.n_tracks;
    return d;
  },
        py::arg("tracks"));

  // ----- windowing ---------------------------------------------------------
  py::class_<SamplingSpec>(m, "SamplingSpec")
      .def(py::init([](int stride, int half_window, int resolution) {
             SamplingSpec spec;
             spec.stride = stride;
             spec.half_window = half_window;
             spec.resolution = resolution;
             spec.validate();
             return spec;
           }),
           py::arg("stride") = 13, py::arg("half_window") = 3, py::arg("resolution") = 224)
      .def_readwrite("stride", &SamplingSpec::stride)
      .def_readwrite("half_window", &SamplingSpec::half_window)
      .def_readwrite("resolution", &SamplingSpec::resolution)
      .def_property_readonly("window_length", &SamplingSpec::window_length);

  py::class_<FrameSlot>(m, "FrameSlot")
      .def_readonly("blank", &FrameSlot::blank)
      .def_readonly("frame_index", &FrameSlot::frame_index)
      .def_readonly("bbox", &FrameSlot::bbox);

  py::class_<WindowSample>(m, "WindowSample")
      .def_readonly("clip_id", &WindowSample::clip_id)
      .def_readonly("face_id", &WindowSample::face_id)
      .def_readonly("center_frame_index", &WindowSample::center_frame_index)
      .def_readonly("label", &WindowSample::label)
      .def_readonly("slots", &WindowSample::slots)
      .def("slot_frames", [](const WindowSample& w) {
        py::list out;
        for (const auto& slot : w.slots) {
          if (slot.blank) {
            out.append(py::none());
          } else {
            out.append(slot.frame_index);
          }
        }
        return out;
      });

  m.def("select_centers", &select_centers, py::arg("track"), py::arg("spec"));
  m.def("build_window", &build_window, py::arg("track"), py::arg("center"), py::arg("spec"));
  m.def("window_manifest_line", &window_manifest_line, py::arg("window"));
  m.def("crop_and_resize",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& image,
           const BBox& bbox, int resolution) {
          return image_to_numpy(crop_and_resize(image_from_numpy(image), bbox, resolution));
        },
        py::arg("image"), py::arg("bbox"), py::arg("resolution"));

  // ----- augmentation ------------------------------------------------------
  m.def("decode_randaugment_spec", [](const std::string& text) {
    const auto spec = decode_randaugment_spec(text);
    return py::make_tuple(spec.num_ops, spec.magnitude, spec.magnitude_std, spec.increasing);
  },
        py::arg("text"), "Returns (num_ops, magnitude, magnitude_std, increasing).");

  // ----- model -------------------------------------------------------------
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init([](int image_size, int patch_size, int tubelet_size, int frames,
                       int embed_dim, int depth, int heads, int decoder_dim, int decoder_depth,
                       double mask_ratio, const std::string& variant) {
             ModelConfig cfg;
             cfg.image_size = image_size;
             cfg.patch_size = patch_size;
             cfg.tubelet_size = tubelet_size;
             cfg.frames = frames;
             cfg.embed_dim = embed_dim;
             cfg.depth = depth;
             cfg.heads = heads;
             cfg.decoder_dim = decoder_dim;
             cfg.decoder_depth = decoder_depth;
             cfg.mask_ratio = mask_ratio;
             cfg.variant = variant;
             cfg.validate();
             return cfg;
           }),
           py::arg("image_size") = 64, py::arg("patch_size") = 16, py::arg("tubelet_size") = 1,
           py::arg("frames") = 7, py::arg("embed_dim") = 96, py::arg("depth") = 4,
           py::arg("heads") = 4, py::arg("decoder_dim") = 48, py::arg("decoder_depth") = 2,
           py::arg("mask_ratio") = 0.9, py::arg("variant") = "toy")
      .def_readonly("image_size", &ModelConfig::image_size)
      .def_readonly("embed_dim", &ModelConfig::embed_dim)
      .def_readonly("mask_ratio", &ModelConfig::mask_ratio)
      .def_property_readonly("tokens", [](const ModelConfig& cfg) { return cfg.grid().total(); });

  m.def("generate_tube_mask",
        [](std::uint64_t seed, int t_tokens, int h_tokens, int w_tokens, double mask_ratio) {
          const auto mask = generate_tube_mask(seed, TokenGrid{t_tokens, h_tokens, w_tokens},
                                               mask_ratio);
          py::array_t<bool> out(static_cast<py::ssize_t>(mask.spatial.size()));
          for (std::size_t i = 0; i < mask.spatial.size(); ++i) {
            out.mutable_data()[i] = mask.spatial[i] != 0;
          }
          return out;
        },
        py::arg("seed"), py::arg("t_tokens"), py::arg("h_tokens"), py::arg("w_tokens"),
        py::arg("mask_ratio"),
        "Spatial cell mask (replicated across temporal positions).");
  m.def("tube_mask_count", &tube_mask_count, py::arg("spatial_cells"), py::arg("mask_ratio"));

  py::class_<VideoMae>(m, "VideoMae")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"), py::arg("seed"))
      .def_property_readonly("config", &VideoMae::config)
      .def_property_readonly("n_params", [](const VideoMae& m_) { return m_.params().size(); })
      .def("classify",
           [](const VideoMae& model, const py::array_t<double, py::array::c_style |
                                                                    py::array::forcecast>& arr) {
             const Logits logits = model.classify(window_from_numpy(arr));
             return py::make_tuple(py::make_tuple(logits.values[0], logits.values[1]),
                                   logits.p_positive());
           },
           py::arg("window"),
           "Normalized (T,H,W,3) window -> ((logit0, logit1), p_positive).")
      .def("mae_loss",
           [](const VideoMae& model, const py::array_t<double, py::array::c_style |
                                                                    py::array::forcecast>& arr,
              std::uint64_t mask_seed) {
             const auto window = window_from_numpy(arr);
             const auto mask = generate_tube_mask(mask_seed, model.config().grid(),
                                                  model.config().mask_ratio);
             return model.mae_loss(window, mask);
           },
           py::arg("window"), py::arg("mask_seed"));

  m.def("normalize_window",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
           const std::array<double, 3>& mean, const std::array<double, 3>& stddev) {
          if (arr.ndim() != 4 || arr.shape(3) != 3) {
            throw ValidationError("window array must have shape (T, H, W, 3)");
          }
          VideoTensor w = VideoTensor::zeros(static_cast<int>(arr.shape(0)),
                                             static_cast<int>(arr.shape(1)),
                                             static_cast<int>(arr.shape(2)));
          std::copy(arr.data(), arr.data() + arr.size(), w.data.begin());
          const auto out = normalize_window(w, mean, stddev);
          py::array_t<double> result({arr.shape(0), arr.shape(1), arr.shape(2), arr.shape(3)});
          std::copy(out.data.begin(), out.data.end(), result.mutable_data());
          return result;
        },
        py::arg("window"), py::arg("mean") = std::array<double, 3>{0.485, 0.456, 0.406},
        py::arg("std") = std::array<double, 3>{0.229, 0.224, 0.225});

  // ----- schedule / optimizer ----------------------------------------------
  py::class_<ScheduleSpec>(m, "ScheduleSpec")
      .def(py::init([](double start_lr, double peak_lr, double end_lr, int warmup_epochs,
                       int total_epochs, std::int64_t steps_per_epoch) {
             ScheduleSpec spec;
             spec.start_lr = start_lr;
             spec.peak_lr = peak_lr;
             spec.end_lr = end_lr;
             spec.warmup_epochs = warmup_epochs;
             spec.total_epochs = total_epochs;
             spec.steps_per_epoch = steps_per_epoch;
             spec.validate();
             return spec;
           }),
           py::arg("start_lr") = 1e-6, py::arg("peak_lr") = 5e-6, py::arg("end_lr") = 1e-6,
           py::arg("warmup_epochs") = 3, py::arg("total_epochs") = 10,
           py::arg("steps_per_epoch") = 1)
      .def_readwrite("steps_per_epoch", &ScheduleSpec::steps_per_epoch);

  m.def("lr_at_step", &lr_at_step, py::arg("schedule"), py::arg("global_step"));

  // ----- evaluation ----------------------------------------------------------
  m.def("average_precision",
        [](const std::vector<double>& scores, const std::vector<int>& labels) -> py::object {
          const auto ap = average_precision(scores, labels);
          if (!ap) return py::none();
          return py::float_(*ap);
        },
        py::arg("scores"), py::arg("labels"));
  m.def("accuracy", &accuracy, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  // ----- synthetic data ------------------------------------------------------
  m.def("generate_dataset",
        [](const std::filesystem::path& output_root, int n_clips, int frames_per_clip,
           int image_size, double imbalance_ratio, double motion_jitter_px, std::uint64_t seed) {
          SynthSpec spec;
          spec.n_clips = n_clips;
          spec.frames_per_clip = frames_per_clip;
          spec.image_size = image_size;
          spec.imbalance_ratio = imbalance_ratio;
          spec.motion_jitter_px = motion_jitter_px;
          spec.seed = seed;
          const auto manifest = generate_dataset(spec, output_root);
          py::dict d;
          d["train_clips"] = manifest.train_clips;
          d["val_clips"] = manifest.val_clips;
          d["test_clips"] = manifest.test_clips;
          d["n_records"] = manifest.records.size();
          d["n_positive_clips"] = manifest.n_positive_clips;
          d["n_negative_clips"] = manifest.n_negative_clips;
          return d;
        },
        py::arg("output_root"), py::arg("n_clips") = 40, py::arg("frames_per_clip") = 6,
        py::arg("image_size") = 64, py::arg("imbalance_ratio") = 10.0,
        py::arg("motion_jitter_px") = 1.0, py::arg("seed") = 42);
}
