#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcgs/codec.hpp"
#include "pcgs/container.hpp"
#include "pcgs/error.hpp"
#include "pcgs/model_io.hpp"
#include "pcgs/synth.hpp"

using namespace pcgs;

namespace {

// "-" selects stdin / stdout.
std::vector<uint8_t>
read_input(const std::string& path)
{
  if (path != "-")
    return read_file(path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(std::cin)),
                            std::istreambuf_iterator<char>());
  if (std::cin.bad())
    fail(ErrorKind::io, "error reading standard input");
  return data;
}

void
write_output(const std::string& path, std::span<const uint8_t> bytes)
{
  if (path != "-")
    return write_file(path, bytes);
  std::cout.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  std::cout.flush();
  if (!std::cout)
    fail(ErrorKind::io, "error writing standard output");
}

std::string
read_text(const std::string& path)
{
  auto bytes = read_input(path);
  return std::string(bytes.begin(), bytes.end());
}

int
exit_code(ErrorKind k)
{
  switch (k) {
  case ErrorKind::io:
    return 1;
  case ErrorKind::format:
    return 2;
  case ErrorKind::invariant:
  case ErrorKind::argument:
    return 3;
  }
  return 3;
}

std::string
fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string
sci(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

//============================================================================

struct RateRow {
  int level;
  size_t delta_bytes;
  size_t cumulative_bytes;
  double anchor_ratio;
  double gauss_ratio;
  bool have_scene;
  double est_bytes;
  ErrorReport err;
};

void
print_rate_table(std::ostream& o, const std::vector<RateRow>& rows)
{
  char line[256];
  std::snprintf(line, sizeof line, "%5s %12s %12s %8s %8s %12s %12s %12s %12s\n", "level",
                "delta_bytes", "cumulative", "r(m^a)", "r(m^g)", "est_bytes", "mse_feat",
                "mse_scale", "mse_offset");
  o << line;
  for (const auto& r : rows) {
    std::string est = r.have_scene ? fixed(r.est_bytes, 1) : "-";
    std::string mf = r.have_scene ? sci(r.err.mse_feat) : "-";
    std::string ms = r.have_scene ? sci(r.err.mse_scaling) : "-";
    std::string mo = r.have_scene ? sci(r.err.mse_offsets) : "-";
    std::snprintf(line, sizeof line, "%5d %12zu %12zu %8.4f %8.4f %12s %12s %12s %12s\n",
                  r.level, r.delta_bytes, r.cumulative_bytes, r.anchor_ratio, r.gauss_ratio,
                  est.c_str(), mf.c_str(), ms.c_str(), mo.c_str());
    o << line;
  }
}

void
write_rate_csv(std::ostream& o, const std::vector<RateRow>& rows)
{
  o << "level,delta_bytes,cumulative_bytes,anchor_ratio,gauss_ratio,est_bytes,mse_feat,"
       "mse_scaling,mse_offsets\n";
  for (const auto& r : rows) {
    o << r.level << "," << r.delta_bytes << "," << r.cumulative_bytes << ","
      << fixed(r.anchor_ratio, 6) << "," << fixed(r.gauss_ratio, 6) << ",";
    if (r.have_scene)
      o << fixed(r.est_bytes, 3) << "," << sci(r.err.mse_feat) << "," << sci(r.err.mse_scaling)
        << "," << sci(r.err.mse_offsets) << "\n";
    else
      o << ",,,\n";
  }
}

}  // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"Progressive anchor-scene codec"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (PCGS_THREADS overrides)")
    ->check(CLI::NonNegativeNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene/model file");
  std::string synth_out = "-", synth_spec;
  std::vector<std::string> synth_set;
  bool synth_print = false;
  synth->add_option("-o,--output", synth_out, "Scene file to write ('-' for stdout)");
  synth->add_option("--spec", synth_spec, "key=value spec file");
  synth->add_option("--set", synth_set, "Override one spec key (key=value)");
  synth->add_flag("--print-spec", synth_print, "Print the resolved spec and exit");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a scene into a progressive bitstream");
  std::string enc_in = "-", enc_out = "-";
  int enc_levels = 0;
  enc->add_option("-i,--input", enc_in, "Scene file ('-' for stdin)");
  enc->add_option("-o,--output", enc_out, "Bitstream to write ('-' for stdout)");
  enc->add_option("--levels", enc_levels, "Encode only the first levels (default: all)")
    ->check(CLI::PositiveNumber);

  // decode
  auto* dec = app.add_subcommand("decode", "Decode a bitstream into a reconstruction file");
  std::string dec_in = "-", dec_out = "-";
  int dec_levels = 0;
  dec->add_option("-i,--input", dec_in, "Bitstream ('-' for stdin)");
  dec->add_option("-o,--output", dec_out, "Reconstruction file ('-' for stdout)");
  dec->add_option("--levels", dec_levels, "Decode this many levels (default: all present)")
    ->check(CLI::PositiveNumber);

  // truncate
  auto* trunc = app.add_subcommand("truncate", "Keep the first levels of a bitstream");
  std::string trunc_in = "-", trunc_out = "-";
  int trunc_level = 0;
  trunc->add_option("-i,--input", trunc_in, "Bitstream ('-' for stdin)");
  trunc->add_option("-o,--output", trunc_out, "Bitstream to write ('-' for stdout)");
  trunc->add_option("--level", trunc_level, "Levels to keep")->required();

  // inspect
  auto* insp = app.add_subcommand("inspect", "Report byte and mask-ratio ledger of a bitstream");
  std::string insp_in = "-", insp_format = "table";
  bool insp_json = false;
  insp->add_option("-i,--input", insp_in, "Bitstream ('-' for stdin)");
  insp->add_flag("--json", insp_json, "JSON-lines output");
  insp->add_option("--format", insp_format, "table, kv or json")
    ->check(CLI::IsMember({"table", "kv", "json"}));

  // verify
  auto* ver = app.add_subcommand("verify", "Check a scene/model file for consistency");
  std::string ver_in = "-";
  ver->add_option("-i,--input", ver_in, "Scene file ('-' for stdin)");

  // rate-report
  auto* rr = app.add_subcommand("rate-report", "Per-level rate and fidelity table");
  std::string rr_in = "-", rr_scene, rr_csv;
  rr->add_option("-i,--input", rr_in, "Bitstream ('-' for stdin)");
  rr->add_option("--scene", rr_scene, "Source scene, enables estimates and MSE columns");
  rr->add_option("--csv", rr_csv, "Also write the table as CSV ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (*synth) {
      SynthSpec spec;
      std::string text = synth_spec.empty() ? "" : read_text(synth_spec);
      for (const auto& kv : synth_set)
        text += "\n" + kv;
      spec = parse_synth_spec(text);
      check_synth_spec(spec);
      if (synth_print) {
        std::cout << to_text(spec);
        return 0;
      }
      write_output(synth_out, write_scene_model(generate(spec)));
    } else if (*enc) {
      SceneModel model = read_scene_model(read_input(enc_in));
      EncodeOptions opts;
      opts.max_levels = enc_levels;
      opts.threads = threads;
      write_output(enc_out, encode(model, opts).stream.to_bytes());
    } else if (*dec) {
      auto bs = ProgressiveBitstream::parse(read_input(dec_in));
      DecodeOptions opts;
      opts.threads = threads;
      write_output(dec_out, write_reconstruction(decode(bs, dec_levels, opts)));
    } else if (*trunc) {
      auto bs = ProgressiveBitstream::parse(read_input(trunc_in));
      write_output(trunc_out, truncate(bs, trunc_level).to_bytes());
    } else if (*insp) {
      auto bs = ProgressiveBitstream::parse(read_input(insp_in));
      InspectReport rep = inspect(bs);
      std::string format = insp_json ? "json" : insp_format;
      if (format == "json")
        std::cout << rep.to_json_lines();
      else if (format == "kv")
        std::cout << rep.to_kv();
      else
        std::cout << rep.to_table();
    } else if (*ver) {
      SceneModel model = read_scene_model(read_input(ver_in));
      auto problems = validate_scene(model);
      if (!problems.empty()) {
        for (const auto& p : problems)
          std::cerr << "pcgs: " << p << "\n";
        return 3;
      }
      std::cout << "ok anchors=" << model.scene.num_anchors
                << " offsets=" << model.scene.offsets_per_anchor
                << " feat_dim=" << model.scene.feat_dim << " levels=" << model.cfg.num_levels
                << "\n";
    } else if (*rr) {
      auto bs = ProgressiveBitstream::parse(read_input(rr_in));
      InspectReport rep = inspect(bs);
      std::vector<RateRow> rows;
      std::optional<SceneModel> model;
      std::vector<RateTerms> est;
      if (!rr_scene.empty()) {
        model = read_scene_model(read_input(rr_scene));
        est = estimate_rates(*model);
      }
      DecodeOptions opts;
      opts.threads = threads;
      size_t cum = rep.header_bytes;
      opts.on_level = [&](const Reconstruction& r) {
        int s = r.level;
        RateRow row{s, rep.delta_bytes[s - 1], 0, rep.anchor_ratio[s - 1],
                    rep.gauss_ratio[s - 1], model.has_value(), 0.0, {}};
        cum += row.delta_bytes;
        row.cumulative_bytes = cum;
        if (model) {
          row.est_bytes = est[s - 1].total_bits() / 8.0;
          row.err = reconstruction_error(model->scene, r);
        }
        rows.push_back(row);
      };
      decode(bs, 0, opts);
      print_rate_table(std::cout, rows);
      if (!rr_csv.empty()) {
        if (rr_csv == "-") {
          write_rate_csv(std::cout, rows);
        } else {
          std::ofstream out(rr_csv);
          if (!out)
            fail(ErrorKind::io, "cannot create " + rr_csv);
          write_rate_csv(out, rows);
          if (!out)
            fail(ErrorKind::io, "error writing " + rr_csv);
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "pcgs: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "pcgs: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
