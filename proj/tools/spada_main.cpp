// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: check | compile | run | bench | emit.
// Exit codes: 0 success, 1 program error, 2 usage error, 3 simulator fault.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "spada/bench.hpp"
#include "spada/compile.hpp"
#include "spada/emit.hpp"
#include "spada/machine.hpp"
#include "spada/parser.hpp"
#include "spada/pipeline.hpp"
#include "spada/printer.hpp"
#include "spada/stencil.hpp"

namespace {

using namespace spada;

constexpr int kExitOk = 0;
constexpr int kExitProgramError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSimFault = 3;

struct CommonOpts {
  std::string path;
  std::vector<std::string> defines;
  std::string config_file;
  bool json_diags = false;
  bool allow_unsafe = false;
  std::string fabric;  // WxH
  uint64_t seed = 1;
  uint64_t max_cycles = 2'000'000;
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_diags(const Diagnostics& d, const CommonOpts& opts) {
  if (!opts.json_diags) {
    d.print(std::cerr);
    return;
  }
  for (const auto& item : d.items()) {
    nlohmann::json j;
    j["rule"] = item.rule;
    j["severity"] = severity_name(item.severity);
    j["file"] = item.file;
    j["line"] = item.loc.line;
    j["col"] = item.loc.col;
    j["message"] = item.message;
    std::cerr << j.dump() << "\n";
  }
}

bool parse_defines(const std::vector<std::string>& defs, ParamMap& out,
                   std::string& err) {
  for (const auto& d : defs) {
    auto eq = d.find('=');
    if (eq == std::string::npos) {
      err = "-D expects NAME=value, got '" + d + "'";
      return false;
    }
    try {
      out[d.substr(0, eq)] = std::stoll(d.substr(eq + 1));
    } catch (...) {
      err = "bad integer in '" + d + "'";
      return false;
    }
  }
  return true;
}

bool apply_config(const std::string& path, FabricConfig& fab, std::string& err) {
  auto text = read_file(path);
  if (!text) {
    err = "cannot open config " + path;
    return false;
  }
  std::istringstream in(*text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    long val = 0;
    try {
      val = std::stol(line.substr(eq + 1));
    } catch (...) {
      continue;
    }
    if (key == "fabric.width") fab.width = (int)val;
    else if (key == "fabric.height") fab.height = (int)val;
    else if (key == "fabric.channels_per_router") fab.channels_per_router = (int)val;
    else if (key == "fabric.router_hop_latency") fab.router_hop_latency = (int)val;
    else if (key == "fabric.alu_op_latency") fab.alu_op_latency = (int)val;
    else if (key == "fabric.bulk_op_throughput") fab.bulk_op_throughput = (int)val;
    else if (key == "fabric.data_task_dispatch") fab.data_task_dispatch = (int)val;
    else if (key == "fabric.block_setup_cycles") fab.block_setup_cycles = (int)val;
  }
  return true;
}

bool parse_fabric(const std::string& s, FabricConfig& fab, std::string& err) {
  if (s.empty()) return true;
  auto x = s.find('x');
  if (x == std::string::npos) {
    err = "--fabric expects WxH, got '" + s + "'";
    return false;
  }
  try {
    fab.width = std::stoi(s.substr(0, x));
    fab.height = std::stoi(s.substr(x + 1));
  } catch (...) {
    err = "--fabric expects WxH, got '" + s + "'";
    return false;
  }
  return true;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Loads a `.spada` kernel or lowers a `.stencil` specification.
std::optional<ast::Kernel> load_program(const CommonOpts& opts,
                                        Diagnostics& diags,
                                        std::string* lowered_text = nullptr) {
  auto text = read_file(opts.path);
  if (!text) {
    diags.error("cli.io", {}, "cannot open " + opts.path);
    return std::nullopt;
  }
  diags.set_file(opts.path);
  if (ends_with(opts.path, ".stencil")) {
    auto spec = parse_stencil(*text, diags);
    if (!spec) return std::nullopt;
    auto ir = analyze(*spec);
    auto kernel = lower(ir, diags);
    if (!kernel) return std::nullopt;
    if (lowered_text) *lowered_text = print_kernel(*kernel);
    return kernel;
  }
  return parse_kernel(*text, diags);
}

std::unique_ptr<AnalyzedKernel> analyze_program(const CommonOpts& opts,
                                                const ParamMap& params,
                                                Diagnostics& diags,
                                                std::string* lowered = nullptr) {
  auto k = load_program(opts, diags, lowered);
  if (!k) return nullptr;
  AnalyzeOptions aopts;
  aopts.allow_unsafe = opts.allow_unsafe;
  return analyze_kernel(*k, params, diags, aopts);
}

std::optional<HostBuffer> load_input(const std::string& path, ElemType t,
                                     std::string& err) {
  if (ends_with(path, ".csv")) return read_csv(path, t, &err);
  return read_binary(path, &err);
}

int run_machine(const CommonOpts& opts, const ParamMap& params,
                const std::vector<std::string>& input_specs,
                const std::vector<std::string>& scalar_specs,
                const std::string& out_dir, int reps, bool do_bench,
                const std::string& csv_path) {
  Diagnostics diags;
  auto analyzed = analyze_program(opts, params, diags);
  if (!analyzed) {
    print_diags(diags, opts);
    return kExitProgramError;
  }
  auto prog = compile_kernel(std::move(analyzed), diags);
  if (!prog) {
    print_diags(diags, opts);
    return kExitProgramError;
  }

  FabricConfig fab;
  std::string err;
  if (!opts.config_file.empty() && !apply_config(opts.config_file, fab, err)) {
    std::cerr << err << "\n";
    return kExitUsage;
  }
  if (!parse_fabric(opts.fabric, fab, err)) {
    std::cerr << err << "\n";
    return kExitUsage;
  }
  if (fab.width < prog->min_width) fab.width = prog->min_width;
  if (fab.height < prog->min_height) fab.height = prog->min_height;

  std::map<std::string, HostBuffer> inputs;
  for (const auto& spec : input_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) {
      std::cerr << "--in expects ARG=path, got '" << spec << "'\n";
      return kExitUsage;
    }
    std::string arg = spec.substr(0, eq), path = spec.substr(eq + 1);
    const ArgExtent* ext = prog->find_arg(arg);
    if (!ext) {
      std::cerr << "no argument '" << arg << "' in this kernel\n";
      return kExitUsage;
    }
    auto buf = load_input(path, ext->type, err);
    if (!buf) {
      std::cerr << err << "\n";
      return kExitUsage;
    }
    // flat containers are reshaped against the extent
    if (buf->per_slice != ext->per_slice &&
        (int64_t)buf->data.size() == ext->slices * ext->per_slice) {
      buf->slices = ext->slices;
      buf->per_slice = ext->per_slice;
    }
    inputs[arg] = std::move(*buf);
  }
  std::map<std::string, double> scalars;
  for (const auto& spec : scalar_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) {
      std::cerr << "--scalar expects NAME=value\n";
      return kExitUsage;
    }
    try {
      scalars[spec.substr(0, eq)] = std::stod(spec.substr(eq + 1));
    } catch (...) {
      std::cerr << "bad scalar in '" << spec << "'\n";
      return kExitUsage;
    }
  }

  Machine m(*prog, fab);
  if (!m.load(inputs, scalars, diags)) {
    print_diags(diags, opts);
    return kExitProgramError;
  }
  print_diags(diags, opts);  // surviving warnings

  if (do_bench) {
    auto stats = bench(m, reps, opts.seed, opts.max_cycles);
    if (!stats.ok) {
      for (const auto& f : stats.faults)
        std::cerr << "fault: " << f.kind << " at PE (" << f.pe.x << ", "
                  << f.pe.y << ") cycle " << f.cycle << ": " << f.detail
                  << "\n";
      return kExitSimFault;
    }
    nlohmann::json j;
    j["repetitions"] = stats.repetitions;
    j["cycles"] = {{"median", stats.cycles.median},
                   {"ci95", {stats.cycles.lo, stats.cycles.hi}}};
    j["makespan_median"] = stats.makespan_median;
    j["runtime_us"] = stats.runtime_us();
    std::cout << j.dump(2) << "\n";
    if (!csv_path.empty()) {
      std::ofstream csv(csv_path, std::ios::app);
      csv << opts.path << "," << stats.cycles.median << "," << stats.cycles.lo
          << "," << stats.cycles.hi << "," << stats.makespan_median << "\n";
    }
    return kExitOk;
  }

  SimReport rep = m.run(opts.seed, opts.max_cycles);
  nlohmann::json report = rep.to_json();
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [name, buf] : rep.outputs) {
    std::string path = out_dir + "/" + name + ".spb";
    std::string werr;
    if (!write_binary(path, buf, &werr)) {
      std::cerr << werr << "\n";
      return kExitProgramError;
    }
    outs[name] = path;
  }
  report["outputs"] = outs;
  std::cout << report.dump(2) << "\n";
  if (!rep.faults.empty()) return kExitSimFault;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPADA compiler and fabric simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  int reps = 100;
  std::vector<std::string> input_specs, scalar_specs;
  std::string out_dir = ".";
  std::string meta_out, emit_routing, emit_tasks, emit_spada, csv_path;

  auto add_common = [&](CLI::App* cmd, bool with_run_flags) {
    cmd->add_option("file", opts.path, "kernel (.spada) or stencil (.stencil)")
        ->required();
    cmd->add_option("-D,--define", opts.defines,
                    "bind a kernel type parameter, NAME=value");
    cmd->add_option("--config", opts.config_file,
                    "key=value fabric defaults file");
    cmd->add_flag("--json", opts.json_diags, "diagnostics as JSON lines");
    if (with_run_flags) {
      cmd->add_option("--fabric", opts.fabric, "fabric size WxH");
      cmd->add_option("--in", input_specs, "input buffer, ARG=path(.spb|.csv)");
      cmd->add_option("--scalar", scalar_specs, "scalar argument, NAME=value");
      cmd->add_option("--out-dir", out_dir, "directory for output buffers");
      cmd->add_option("--seed", opts.seed, "scheduler seed");
      cmd->add_option("--max-cycles", opts.max_cycles, "cycle budget");
      cmd->add_flag("--allow-unsafe", opts.allow_unsafe,
                    "downgrade static race/conflict findings to warnings");
    }
  };

  auto* c_check = app.add_subcommand("check", "static analysis only");
  add_common(c_check, false);

  auto* c_compile = app.add_subcommand("compile", "compile and emit metadata");
  add_common(c_compile, false);
  c_compile->add_option("-o,--output", meta_out, "metadata JSON path");
  c_compile->add_option("--emit-routing", emit_routing,
                        "write the routing graph (dot|json)")
      ->check(CLI::IsMember({"dot", "json"}));
  c_compile->add_option("--emit-tasks", emit_tasks,
                        "write the task pipeline graphs (dot)")
      ->check(CLI::IsMember({"dot"}));
  c_compile->add_option("--emit-spada", emit_spada,
                        "write the lowered kernel text (stencil inputs)");

  auto* c_run = app.add_subcommand("run", "compile and simulate");
  add_common(c_run, true);

  auto* c_bench = app.add_subcommand("bench", "repeated timed simulation");
  add_common(c_bench, true);
  c_bench->add_option("--reps", reps, "number of repetitions");
  c_bench->add_option("--csv", csv_path, "append results to a CSV file");

  auto* c_emit = app.add_subcommand("emit", "artifact emission only");
  add_common(c_emit, false);
  c_emit->add_option("--routing", emit_routing, "routing graph (dot|json)")
      ->check(CLI::IsMember({"dot", "json"}));
  c_emit->add_flag_callback("--tasks", [&] { emit_tasks = "dot"; },
                            "task pipeline graphs (dot)");
  c_emit->add_option("--spada", emit_spada, "lowered kernel text path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  ParamMap params;
  std::string err;
  if (!parse_defines(opts.defines, params, err)) {
    std::cerr << err << "\n";
    return kExitUsage;
  }

  if (c_check->parsed()) {
    Diagnostics diags;
    auto analyzed = analyze_program(opts, params, diags);
    print_diags(diags, opts);
    return analyzed ? kExitOk : kExitProgramError;
  }

  if (c_compile->parsed() || c_emit->parsed()) {
    Diagnostics diags;
    std::string lowered;
    auto analyzed = analyze_program(opts, params, diags, &lowered);
    if (!analyzed) {
      print_diags(diags, opts);
      return kExitProgramError;
    }
    if (!emit_spada.empty()) {
      std::string text =
          !lowered.empty() ? lowered : print_kernel(analyzed->kernel);
      std::ofstream out(emit_spada);
      out << text;
    }
    if (!emit_routing.empty()) {
      if (emit_routing == "dot") std::cout << emit_routing_dot(*analyzed);
      else std::cout << emit_routing_json(*analyzed).dump(2) << "\n";
    }
    auto prog = compile_kernel(std::move(analyzed), diags);
    if (!prog) {
      print_diags(diags, opts);
      return kExitProgramError;
    }
    print_diags(diags, opts);
    if (!emit_tasks.empty()) std::cout << emit_tasks_dot(*prog);
    if (c_compile->parsed()) {
      std::string meta = prog->metadata.dump(2) + "\n";
      if (meta_out.empty()) {
        std::cout << meta;
      } else {
        std::ofstream out(meta_out);
        out << meta;
      }
    }
    return kExitOk;
  }

  if (c_run->parsed())
    return run_machine(opts, params, input_specs, scalar_specs, out_dir, 1,
                       false, "");
  if (c_bench->parsed())
    return run_machine(opts, params, input_specs, scalar_specs, out_dir, reps,
                       true, csv_path);
  return kExitUsage;
}
