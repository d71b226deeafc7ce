// vabokeh: render, focal-plane, eval, serve and synth subcommands.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vabokeh/imagery.hpp"
#include "vabokeh/metrics.hpp"
#include "vabokeh/pipeline.hpp"
#include "vabokeh/service.hpp"
#include "vabokeh/synth.hpp"

namespace fs = std::filesystem;
using namespace vabokeh;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return PipelineConfig::from_record(TextRecord::load(path));
}

struct RenderArgs {
  std::string image, depth, mask, out_dir, lens_config;
  std::vector<double> f_numbers;
  std::uint64_t seed = 0;
  bool coc_maps = false;
};

int run_render(const RenderArgs& a) {
  const PipelineConfig cfg = load_config(a.lens_config);
  const RasterImage src = load_image(a.image);
  const DepthMap depth = load_depth(a.depth);
  const BinaryMask mask = load_mask(a.mask);
  const VariableRender vr = render_variable(src, depth, mask, a.f_numbers, cfg);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  TextRecord fp = focal_plane_record(vr.focal);
  fp.set("focus_distance_mm", vr.focus_distance_mm);
  fp.set("seed", std::to_string(a.seed));
  fp.save(out / "focal_plane.txt");
  save_mask(vr.focal.region_mask, out / "focal_mask.png");

  for (const auto& [n, r] : vr.renders) {
    const std::string stem = "pred_f" + format_f_number(n);
    codec::write_file_bytes(out / (stem + ".png"), encode_png(r.output.image, 8));
    TextRecord stats = render_stats_record(r);
    stats.set("seed", std::to_string(a.seed));
    stats.save(out / (stem + ".stats.txt"));
    if (a.coc_maps) {
      save_float_map(r.coc.radius.data(), r.coc.radius.height(), r.coc.radius.width(),
                     out / ("coc_f" + format_f_number(n) + ".pfm"));
    }
    std::cout << (out / (stem + ".png")).string() << "\n";
  }
  return 0;
}

struct FocalArgs {
  std::string depth, mask, out_dir;
  int k = kDefaultClassCount;
  int bins = kDefaultHistogramBins;
};

int run_focal_plane(const FocalArgs& a) {
  const DepthMap depth = load_depth(a.depth);
  const BinaryMask mask = load_mask(a.mask);
  require_same_extent(depth, mask, "focal-plane (depth vs mask)");
  const ThresholdSet ts = multi_otsu(build_histogram(depth, a.bins), a.k);
  const DepthRegions regions = segment_depth(depth, ts);
  const FocalPlane fp = select_focal_region(regions, mask);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  // Labels are spread over the 8-bit range so the file is viewable.
  RasterImage labels(depth.height(), depth.width(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels.values()[i] = static_cast<double>(regions.labels.values()[i]) / (a.k - 1);
  }
  save_image(labels, out / "labels.png", 8);
  save_mask(fp.region_mask, out / "focal_mask.png");
  const TextRecord rec = focal_plane_record(fp);
  rec.save(out / "focal_plane.txt");
  std::cout << rec.str();
  return 0;
}

struct EvalArgs {
  std::string dataset_root, pred_dir, out;
  std::vector<double> f_numbers{std::begin(kApertureStops), std::end(kApertureStops)};
};

int run_eval(const EvalArgs& a) {
  const MetricReport report = evaluate_dataset(a.dataset_root, a.pred_dir, a.f_numbers);
  if (report.scene_count == 0) {
    throw IoError("no scenes found under '" + a.dataset_root + "'");
  }
  const std::string table = report_table(report);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(fs::path(a.out) / "report.txt", table);
  }
  std::cout << table;
  return 0;
}

struct ServeArgs {
  std::optional<int> port;
  std::string scene_root, lens_config, host = "0.0.0.0";
  int worker_limit = 2;
};

int run_serve(const ServeArgs& a) {
  const int port = a.port ? *a.port : service::port_from_env();
  std::optional<fs::path> root;
  if (!a.scene_root.empty()) root = a.scene_root;
  service::ServiceCore core(root, a.worker_limit, load_config(a.lens_config));
  httplib::Server server;
  service::configure_pool(server, a.worker_limit);
  server.set_payload_max_length(std::size_t{256} << 20);
  service::mount(server, core);
  std::cerr << "vabokeh: " << core.scenes().size() << " scene(s), listening on " << a.host << ":"
            << port << "\n";
  if (!server.listen(a.host, port)) throw IoError("cannot listen on port " + std::to_string(port));
  return 0;
}

struct SynthArgs {
  std::string out_dir;
  int width = 96, height = 64;
  std::uint64_t seed = 7;
};

int run_synth(const SynthArgs& a) {
  synth::write_mini_dataset(a.out_dir, a.width, a.height, a.seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-aperture bokeh rendering"};
  app.require_subcommand(1);

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Render one output per f-number");
  render->add_option("--image", ra.image, "All-in-focus image")->required()->check(CLI::ExistingFile);
  render->add_option("--depth", ra.depth, "Depth map")->required()->check(CLI::ExistingFile);
  render->add_option("--mask", ra.mask, "Focal-plane mask")->required()->check(CLI::ExistingFile);
  render->add_option("--f-number", ra.f_numbers, "Target f-number (repeatable)")
      ->required()
      ->check(CLI::PositiveNumber);
  render->add_option("--out-dir", ra.out_dir, "Output directory")->required();
  render->add_option("--lens-config", ra.lens_config, "Lens/calibration record")
      ->check(CLI::ExistingFile);
  render->add_option("--seed", ra.seed, "Seed echoed into metadata");
  render->add_flag("--coc-maps", ra.coc_maps, "Also write CoC radius maps (PFM)");

  FocalArgs fa;
  auto* focal = app.add_subcommand("focal-plane", "Segment depth and select the focal region");
  focal->add_option("--depth", fa.depth, "Depth map")->required()->check(CLI::ExistingFile);
  focal->add_option("--mask", fa.mask, "Focal-plane mask")->required()->check(CLI::ExistingFile);
  focal->add_option("--k", fa.k, "Number of depth classes")->capture_default_str()->check(CLI::Range(2, 16));
  focal->add_option("--bins", fa.bins, "Histogram bins")->capture_default_str()->check(CLI::Range(2, 65536));
  focal->add_option("--out-dir", fa.out_dir, "Output directory")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score predictions against a dataset");
  eval->add_option("--dataset-root", ea.dataset_root, "Dataset root")->required();
  eval->add_option("--pred-dir", ea.pred_dir, "Prediction root")->required();
  eval->add_option("--f-numbers", ea.f_numbers, "Apertures to score")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("--out", ea.out, "Directory for report.json and report.txt");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", sa.port, "Port (default: $VABOKEH_PORT or 8080)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", sa.host, "Bind address")->capture_default_str();
  serve->add_option("--scene-root", sa.scene_root, "Scene directory")->check(CLI::ExistingDirectory);
  serve->add_option("--worker-limit", sa.worker_limit, "Concurrent compute requests")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  serve->add_option("--lens-config", sa.lens_config, "Default lens/calibration record")
      ->check(CLI::ExistingFile);

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Write the synthetic mini-dataset");
  synth->add_option("--out-dir", ya.out_dir, "Output root")->required();
  synth->add_option("--width", ya.width, "Image width")->capture_default_str()->check(CLI::Range(32, 4096));
  synth->add_option("--height", ya.height, "Image height")->capture_default_str()->check(CLI::Range(32, 4096));
  synth->add_option("--seed", ya.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*render) return run_render(ra);
    if (*focal) return run_focal_plane(fa);
    if (*eval) return run_eval(ea);
    if (*serve) return run_serve(sa);
    if (*synth) return run_synth(ya);
  } catch (const DegenerateInputError& e) {
    std::cerr << "error: degenerate input: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
