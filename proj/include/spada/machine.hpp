// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "spada/compile.hpp"
#include "spada/hostbuf.hpp"

namespace spada {

struct FabricConfig {
  int width = 8, height = 8;
  int channels_per_router = ChannelBudget::usable;
  int router_hop_latency = 1;
  int alu_op_latency = 1;
  int bulk_op_throughput = 4;   // elements per cycle for vectorized ops
  int data_task_dispatch = 2;   // wavelet-triggered task entry overhead
  int block_setup_cycles = 4;   // task table + router programming per block
};

struct Fault {
  std::string kind;  // race | channel-conflict | deadlock | oob | max-cycles
  PECoord pe{0, 0};
  uint64_t cycle = 0;
  std::string detail;
};

struct SimReport {
  std::vector<std::pair<PECoord, uint64_t>> pe_cycles;  // finish per PE
  uint64_t total_cycles = 0;
  uint64_t total_wavelets = 0;
  std::vector<Fault> faults;
  std::map<std::string, HostBuffer> outputs;
  bool awaiting_input = false;

  bool has_fault(const std::string& kind) const {
    for (const auto& f : faults)
      if (f.kind == kind) return true;
    return false;
  }
  nlohmann::json to_json() const;
};

class Machine {
 public:
  Machine(const CompiledProgram& prog, FabricConfig fab)
      : prog_(prog), fab_(fab) {}

  /// Stages host data. Fails on fabric overflow or extent mismatches.
  bool load(const std::map<std::string, HostBuffer>& inputs,
            const std::map<std::string, double>& scalars, Diagnostics& diags) {
    if (prog_.min_width > fab_.width || prog_.min_height > fab_.height) {
      diags.error("load.fabric-too-small", SourceLoc{},
                  "program needs a " + std::to_string(prog_.min_width) + "x" +
                      std::to_string(prog_.min_height) + " fabric but only " +
                      std::to_string(fab_.width) + "x" +
                      std::to_string(fab_.height) + " is configured");
      return false;
    }
    inputs_ = inputs;
    scalars_ = scalars;
    for (const auto& ext : prog_.args) {
      if (ext.scalar) {
        if (!scalars_.count(ext.name))
          diags.warning("load.missing-scalar", SourceLoc{},
                        "scalar argument '" + ext.name + "' defaults to 0");
        continue;
      }
      if (ext.mode == ast::ArgMode::ReadOnly) {
        auto it = inputs_.find(ext.name);
        if (it == inputs_.end()) continue;  // runs report awaiting-input
        int64_t want = ext.slices * ext.per_slice;
        if ((int64_t)it->second.data.size() != want) {
          diags.error("load.extent-mismatch", SourceLoc{},
                      "input '" + ext.name + "' carries " +
                          std::to_string(it->second.data.size()) +
                          " elements but the extent is " +
                          std::to_string(ext.slices) + " x " +
                          std::to_string(ext.per_slice));
          return false;
        }
      }
    }
    loaded_ = true;
    return true;
  }

  /// Event loop. Deterministic for a given seed; the seed only drives the
  /// choice among runnable tasks on each PE.
  SimReport run(uint64_t seed, uint64_t max_cycles = 2'000'000) {
    SimReport rep;
    if (!loaded_) {
      rep.faults.push_back({"not-loaded", {0, 0}, 0, "machine not loaded"});
      return rep;
    }
    reset(seed);
    while (cycle_ < max_cycles) {
      progressed_ = false;
      advance_wavelets();
      if (fault_) break;
      run_send_engines();
      if (fault_) break;
      run_arg_engines();
      run_recv_engines();
      step_pes();
      if (fault_) break;
      audit_conservation();
      if (fault_) break;
      if (machine_done()) break;
      if (!progressed_) {
        if (stalled_on_input()) {
          rep.awaiting_input = true;
          break;
        }
        fault_ = Fault{"deadlock", first_blocked_pe(), cycle_,
                       "no statement can make progress"};
        break;
      }
      ++cycle_;
    }
    if (!fault_ && !rep.awaiting_input && cycle_ >= max_cycles)
      fault_ = Fault{"max-cycles", {0, 0}, cycle_, "cycle budget exhausted"};
    if (fault_) rep.faults.push_back(*fault_);
    rep.total_cycles = cycle_;
    for (const auto& [p, pe] : pes_)
      rep.pe_cycles.push_back({p, pe.finish_cycle});
    rep.total_wavelets = injected_total_;
    for (auto& [name, buf] : outputs_) rep.outputs[name] = buf;
    return rep;
  }

  // conservation inspection hooks (used by tests)
  int64_t wavelets_in_flight() const {
    int64_t n = 0;
    for (const auto& [key, slot] : slots_)
      if (slot.has_value()) ++n;
    return n;
  }
  int64_t wavelets_injected() const { return injected_total_; }
  int64_t wavelets_consumed() const { return consumed_total_; }

 private:
  // ---- runtime state -------------------------------------------------------

  struct Buffer {
    ElemType t = ElemType::F32;
    std::vector<Value> v;
  };

  struct AsyncOp {
    enum class Kind { Send, Recv, ArgRecv, ArgSend, Bulk };
    Kind kind;
    int id = 0;
    PECoord pe{0, 0};
    bool done = false;
    // network sends
    int circuit = -1;
    int phase = 0;
    std::string stream;
    int64_t channel = 0;
    std::vector<PECoord> path;
    // data movement
    Buffer* src_buf = nullptr;
    int64_t src_off = 0;
    std::vector<Value> immediates;
    Buffer* dst_buf = nullptr;
    int64_t dst_off = 0;
    int64_t count = 0;
    int64_t moved = 0;
    // args
    const ArgExtent* arg = nullptr;
    int64_t slice = 0;
    // bulk
    uint64_t complete_at = 0;
  };

  struct Span {
    int op_id;
    const Buffer* buf;
    int64_t lo, hi;  // half-open
    bool write;
  };

  struct Frame {
    const std::vector<ast::StmtPtr>* list = nullptr;
    std::size_t idx = 0;
    // loop control (for / scalar map / inline foreach)
    const ast::Stmt* loop = nullptr;
    int64_t it = 0, end = 0, step = 1;
    bool is_foreach = false;
    bool foreach_elem_open = false;  // body running for a delivered element
    int64_t foreach_seen = 0;
    int64_t foreach_expected = 0;
  };

  struct TaskRt {
    const Task* task = nullptr;
    const BlockProgram* bp = nullptr;
    bool activated = false, unblocked = false, done = false;
    int next_stmt = 0;
    std::vector<Frame> frames;
    AsyncOp* waiting_on = nullptr;
    bool waiting_all = false;
    // data task element loop
    int64_t consumed = 0;
    int64_t expected = 0;
    bool body_open = false;
    std::map<std::string, Value> locals;
  };

  struct BlockRt {
    const BlockProgram* bp = nullptr;
    std::vector<TaskRt> tasks;
    std::vector<AsyncOp*> issued;  // for awaitall and block completion
    std::map<std::string, AsyncOp*> completions;
  };

  struct PERt {
    PECoord coord{0, 0};
    std::map<std::string, Buffer> mem;
    std::vector<int> block_list;
    std::size_t cur = 0;
    std::unique_ptr<BlockRt> block;
    uint64_t busy_until = 0;
    uint64_t finish_cycle = 0;
    std::mt19937_64 rng;
    std::vector<Span> spans;
  };

  struct Wavelet {
    Value value;
    int circuit;
    int phase;
    const std::string* stream;
    const std::vector<PECoord>* path;
    int pos = 0;
    bool delivered = false;
  };

  struct Consumer {
    TaskRt* task = nullptr;    // data task or inline foreach owner
    Frame* frame = nullptr;    // inline foreach frame
    AsyncOp* op = nullptr;     // background receive
    int64_t remaining = 0;
  };

  const CompiledProgram& prog_;
  FabricConfig fab_;
  bool loaded_ = false;
  std::map<std::string, HostBuffer> inputs_;
  std::map<std::string, double> scalars_;

  uint64_t cycle_ = 0;
  bool progressed_ = false;
  std::optional<Fault> fault_;
  std::map<PECoord, PERt> pes_;
  std::map<std::pair<PECoord, int64_t>, std::optional<Wavelet>> slots_;
  std::deque<AsyncOp> ops_;
  std::map<std::tuple<int, std::string, PECoord>, std::deque<Consumer>> consumers_;
  std::map<std::pair<std::string, int64_t>, int64_t> arg_cursor_;  // reads
  std::map<std::pair<std::string, int64_t>, int64_t> out_cursor_;
  std::map<std::string, HostBuffer> outputs_;
  std::map<std::tuple<int, std::string, PECoord>, int> circuit_ids_;
  int64_t injected_total_ = 0, consumed_total_ = 0;

  const ast::Kernel& kernel() const { return prog_.analysis->kernel; }
  const ParamMap& params() const { return prog_.analysis->params; }

  void set_fault(std::string kind, PECoord pe, std::string detail) {
    if (!fault_) fault_ = Fault{std::move(kind), pe, cycle_, std::move(detail)};
  }

  // ---- reset / load --------------------------------------------------------

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  void reset(uint64_t seed) {
    cycle_ = 0;
    fault_.reset();
    pes_.clear();
    slots_.clear();
    ops_.clear();
    consumers_.clear();
    arg_cursor_.clear();
    out_cursor_.clear();
    outputs_.clear();
    circuit_ids_.clear();
    injected_total_ = consumed_total_ = 0;

    for (const auto& [p, blocks] : prog_.pe_blocks) {
      PERt pe;
      pe.coord = p;
      pe.block_list = blocks;
      pe.rng.seed(mix(seed ^ mix((uint64_t)(p.x * 131071 + p.y + 1))));
      pes_[p] = std::move(pe);
    }
    // allocate declared memory (program-lifetime and phase-local alike)
    Diagnostics scratch;
    auto alloc = [&](const ast::PlaceBlock& pb) {
      auto cs = resolve_subgrid(pb.sg, params(), scratch);
      if (!cs) return;
      for (PECoord p : cs->enumerate()) {
        auto it = pes_.find(p);
        if (it == pes_.end()) {
          // memory on PEs with no compute is legal; they stay idle
          PERt pe;
          pe.coord = p;
          pe.rng.seed(mix(seed ^ mix((uint64_t)(p.x * 131071 + p.y + 1))));
          it = pes_.emplace(p, std::move(pe)).first;
        }
        for (const auto& d : pb.decls) {
          int64_t n = 1;
          for (const auto& dim : d.shape) {
            auto v = detail::try_eval(*dim, params());
            n *= v ? std::max<int64_t>(*v, 0) : 0;
          }
          Buffer b;
          b.t = d.type;
          b.v.assign((std::size_t)std::max<int64_t>(n, 1), Value{d.type, 0.0f, 0});
          it->second.mem[d.name] = std::move(b);
        }
      }
    };
    for (const auto& item : kernel().items) {
      if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) alloc(*pb);
      else
        for (const auto& blk : std::get<ast::Phase>(item).blocks)
          if (auto* pb2 = std::get_if<ast::PlaceBlock>(&blk)) alloc(*pb2);
    }
    for (const auto& ext : prog_.args)
      if (!ext.scalar && ext.mode == ast::ArgMode::WriteOnly)
        outputs_[ext.name] = HostBuffer::make(ext.type, ext.slices, ext.per_slice);
    for (auto& [p, pe] : pes_)
      if (!pe.block_list.empty()) open_block(pe);
  }

  // ---- block / task lifecycle ----------------------------------------------

  void open_block(PERt& pe) {
    pe.busy_until = std::max(pe.busy_until,
                             cycle_ + (uint64_t)fab_.block_setup_cycles);
    const BlockProgram& bp = prog_.blocks[pe.block_list[pe.cur]];
    auto blk = std::make_unique<BlockRt>();
    blk->bp = &bp;
    blk->tasks.resize(bp.tasks.tasks.size());
    for (std::size_t t = 0; t < bp.tasks.tasks.size(); ++t) {
      TaskRt& rt = blk->tasks[t];
      rt.task = &bp.tasks.tasks[t];
      rt.bp = &bp;
      bool has_activate = false, has_unblock = false;
      for (const auto& [p, kind] : rt.task->preds)
        (kind == TaskEdge::Activate ? has_activate : has_unblock) = true;
      if (rt.task->kind == Task::Kind::Data) {
        rt.activated = true;  // data tasks are always active
        rt.unblocked = !has_unblock;
      } else {
        rt.activated = !has_activate;
        rt.unblocked = !has_unblock;
      }
      rt.locals[bp.block->sg.dims[0].name] =
          Value::of_int(bp.block->sg.dims[0].type, pe.coord.x);
      rt.locals[bp.block->sg.dims[1].name] =
          Value::of_int(bp.block->sg.dims[1].type, pe.coord.y);
      if (rt.task->kind == Task::Kind::Data) arm_data_task(pe, *blk, rt);
    }
    pe.block = std::move(blk);
  }

  void arm_data_task(PERt& pe, BlockRt&, TaskRt& rt) {
    const ast::Stmt* fe = trigger_stmt(rt);
    if (!fe) return;
    std::string stream = resolve_stream_name(*fe, pe, rt);
    ParamMap env = params();
    env[rt.bp->block->sg.dims[0].name] = pe.coord.x;
    env[rt.bp->block->sg.dims[1].name] = pe.coord.y;
    int64_t expected = -1;
    if (fe->range) {
      Diagnostics scratch;
      if (auto r = resolve_range(*fe->range, env, scratch)) expected = r->count();
    }
    if (expected < 0) {
      auto it = prog_.recv_totals.find(
          {rt.bp->phase_index, fe->site_id, pe.coord.x, pe.coord.y});
      expected = it == prog_.recv_totals.end() ? 0 : it->second;
    }
    rt.expected = expected;
    if (expected <= 0) return;  // nothing will arrive
    Consumer c;
    c.task = &rt;
    c.remaining = expected;
    consumers_[{rt.bp->phase_index, stream, pe.coord}].push_back(c);
  }

  const ast::Stmt* trigger_stmt(const TaskRt& rt) const {
    if (rt.task->dag_nodes.empty()) return nullptr;
    const auto& n = rt.bp->dag->nodes[rt.task->dag_nodes.front()];
    return n.stmt && n.stmt->kind == ast::StmtKind::Foreach ? n.stmt : nullptr;
  }

  void complete_task(PERt&, BlockRt& blk, TaskRt& rt) {
    rt.done = true;
    int self = -1;
    for (std::size_t t = 0; t < blk.tasks.size(); ++t)
      if (&blk.tasks[t] == &rt) self = (int)t;
    for (auto& other : blk.tasks) {
      for (const auto& [p, kind] : other.task->preds) {
        if (p != self) continue;
        if (kind == TaskEdge::Activate) other.activated = true;
        else other.unblocked = true;
      }
    }
  }

  bool block_done(const BlockRt& blk) const {
    for (const auto& t : blk.tasks)
      if (!t.done) return false;
    for (const auto* op : blk.issued)
      if (!op->done) return false;
    return true;
  }

  void advance_block(PERt& pe) {
    pe.block.reset();
    ++pe.cur;
    if (pe.cur < pe.block_list.size()) open_block(pe);
    pe.finish_cycle = cycle_;
  }

  bool machine_done() const {
    for (const auto& [p, pe] : pes_)
      if (pe.block) return false;
    if (wavelets_in_flight() > 0) return false;
    for (const auto& op : ops_)
      if (!op.done) return false;
    return true;
  }

  PECoord first_blocked_pe() const {
    for (const auto& [p, pe] : pes_)
      if (pe.block) return p;
    return {0, 0};
  }

  bool stalled_on_input() const {
    for (const auto& op : ops_) {
      if (op.done || op.kind != AsyncOp::Kind::ArgRecv) continue;
      auto in = inputs_.find(op.arg->name);
      if (in == inputs_.end()) return true;
      auto cit = arg_cursor_.find({op.arg->name, op.slice});
      int64_t cursor = cit == arg_cursor_.end() ? 0 : cit->second;
      if (cursor >= op.arg->per_slice) return true;  // host data exhausted
    }
    return false;
  }

  // ---- spans / race detection ----------------------------------------------

  void add_span(PERt& pe, const AsyncOp& op, const Buffer* buf, int64_t lo,
                int64_t hi, bool write) {
    if (!buf) return;
    for (const auto& sp : pe.spans) {
      if (sp.buf != buf || sp.op_id == op.id) continue;
      if (sp.lo < hi && lo < sp.hi && (sp.write || write)) {
        set_fault("race", pe.coord,
                  "overlapping concurrent buffer use by two operations");
        return;
      }
    }
    pe.spans.push_back({op.id, buf, lo, hi, write});
  }

  void drop_spans(PERt& pe, int op_id) {
    pe.spans.erase(std::remove_if(pe.spans.begin(), pe.spans.end(),
                                  [&](const Span& s) { return s.op_id == op_id; }),
                   pe.spans.end());
  }

  void check_access(PERt& pe, const Buffer* buf, int64_t idx, bool write,
                    int op_id = -1) {
    for (const auto& sp : pe.spans) {
      if (sp.buf != buf || (op_id >= 0 && sp.op_id == op_id)) continue;
      if (idx >= sp.lo && idx < sp.hi && (sp.write || write)) {
        set_fault("race", pe.coord,
                  "buffer element accessed while an asynchronous operation "
                  "holds it");
        return;
      }
    }
  }

  // ---- expression evaluation ----------------------------------------------

  Buffer* find_buffer(PERt& pe, const std::string& name) {
    auto it = pe.mem.find(name);
    return it == pe.mem.end() ? nullptr : &it->second;
  }

  std::optional<Value> eval(const ast::Expr& e, PERt& pe, TaskRt& rt) {
    switch (e.kind) {
      case ast::Expr::Kind::IntLit:
        return Value::of_int(e.type == ElemType::Invalid ? ElemType::I64 : e.type,
                             e.int_val);
      case ast::Expr::Kind::FloatLit:
        return Value::of_f32((float)e.float_val);
      case ast::Expr::Kind::Var: {
        auto lv = rt.locals.find(e.name);
        if (lv != rt.locals.end()) return lv->second;
        auto pv = params().find(e.name);
        if (pv != params().end()) return Value::of_int(ElemType::I64, pv->second);
        auto sv = scalars_.find(e.name);
        if (sv != scalars_.end()) {
          const ast::ArgDecl* ad = kernel().find_arg(e.name);
          if (ad && ad->type == ElemType::F32)
            return Value::of_f32((float)sv->second);
          if (ad) return Value::of_int(ad->type, (int64_t)sv->second);
        }
        if (Buffer* b = find_buffer(pe, e.name)) {
          check_access(pe, b, 0, false);
          return b->v[0];
        }
        if (kernel().find_arg(e.name)) return Value::of_f32(0.0f);  // default
        set_fault("oob", pe.coord, "unknown name '" + e.name + "'");
        return std::nullopt;
      }
      case ast::Expr::Kind::Index: {
        Buffer* b = find_buffer(pe, e.name);
        if (!b) {
          set_fault("oob", pe.coord, "unknown array '" + e.name + "'");
          return std::nullopt;
        }
        auto idx = flat_index(e, *b, pe, rt);
        if (!idx) return std::nullopt;
        check_access(pe, b, *idx, false);
        return b->v[(std::size_t)*idx];
      }
      case ast::Expr::Kind::Un: {
        auto v = eval(*e.lhs, pe, rt);
        if (!v) return std::nullopt;
        if (e.un_op == ast::UnOp::Neg) {
          if (v->t == ElemType::F32) return Value::of_f32(-v->f);
          return Value::of_int(v->t, -v->i);
        }
        return Value::of_int(ElemType::I64, v->i == 0 && v->f == 0.0f ? 1 : 0);
      }
      case ast::Expr::Kind::Bin: {
        auto a = eval(*e.lhs, pe, rt);
        if (!a) return std::nullopt;
        auto b = eval(*e.rhs, pe, rt);
        if (!b) return std::nullopt;
        return apply_bin(e.bin_op, *a, *b, pe);
      }
    }
    return std::nullopt;
  }

  std::optional<Value> apply_bin(ast::BinOp op, Value a, Value b, PERt& pe) {
    bool fl = a.t == ElemType::F32 || b.t == ElemType::F32;
    auto boolean = [](bool x) { return Value::of_int(ElemType::I64, x ? 1 : 0); };
    if (fl) {
      float x = a.t == ElemType::F32 ? a.f : (float)a.i;
      float y = b.t == ElemType::F32 ? b.f : (float)b.i;
      switch (op) {
        case ast::BinOp::Add: return Value::of_f32(x + y);
        case ast::BinOp::Sub: return Value::of_f32(x - y);
        case ast::BinOp::Mul: return Value::of_f32(x * y);
        case ast::BinOp::Div: return Value::of_f32(x / y);
        case ast::BinOp::Mod:
          set_fault("oob", pe.coord, "modulo on floats");
          return std::nullopt;
        case ast::BinOp::Eq: return boolean(x == y);
        case ast::BinOp::Ne: return boolean(x != y);
        case ast::BinOp::Lt: return boolean(x < y);
        case ast::BinOp::Le: return boolean(x <= y);
        case ast::BinOp::Gt: return boolean(x > y);
        case ast::BinOp::Ge: return boolean(x >= y);
        default: return boolean(false);
      }
    }
    int64_t x = a.i, y = b.i;
    ElemType t = integer_rank(a.t) >= integer_rank(b.t) ? a.t : b.t;
    switch (op) {
      case ast::BinOp::Add: return Value::of_int(t, truncate_to(t, x + y));
      case ast::BinOp::Sub: return Value::of_int(t, truncate_to(t, x - y));
      case ast::BinOp::Mul: return Value::of_int(t, truncate_to(t, x * y));
      case ast::BinOp::Div:
        if (y == 0) {
          set_fault("oob", pe.coord, "integer division by zero");
          return std::nullopt;
        }
        return Value::of_int(t, x / y);
      case ast::BinOp::Mod: {
        if (y == 0) {
          set_fault("oob", pe.coord, "integer modulo by zero");
          return std::nullopt;
        }
        int64_t r = x % y;
        if (r != 0 && (r < 0) != (y < 0)) r += y;
        return Value::of_int(t, r);
      }
      case ast::BinOp::Eq: return Value::of_int(ElemType::I64, x == y);
      case ast::BinOp::Ne: return Value::of_int(ElemType::I64, x != y);
      case ast::BinOp::Lt: return Value::of_int(ElemType::I64, x < y);
      case ast::BinOp::Le: return Value::of_int(ElemType::I64, x <= y);
      case ast::BinOp::Gt: return Value::of_int(ElemType::I64, x > y);
      case ast::BinOp::Ge: return Value::of_int(ElemType::I64, x >= y);
      case ast::BinOp::And: return Value::of_int(ElemType::I64, x != 0 && y != 0);
      case ast::BinOp::Or: return Value::of_int(ElemType::I64, x != 0 || y != 0);
    }
    return std::nullopt;
  }

  std::optional<int64_t> flat_index(const ast::Expr& e, const Buffer& b, PERt& pe,
                                    TaskRt& rt) {
    // row-major over the declared shape
    const ast::PlaceDecl* d = nullptr;
    for (const auto& item : kernel().items) {
      auto scan = [&](const ast::PlaceBlock& pb) {
        for (const auto& dd : pb.decls)
          if (dd.name == e.name) d = &dd;
      };
      if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) scan(*pb);
      else
        for (const auto& blk : std::get<ast::Phase>(item).blocks)
          if (auto* pb2 = std::get_if<ast::PlaceBlock>(&blk)) scan(*pb2);
    }
    int64_t flat = 0;
    for (std::size_t dim = 0; dim < e.indices.size(); ++dim) {
      auto iv = eval(*e.indices[dim], pe, rt);
      if (!iv) return std::nullopt;
      int64_t extent = 1;
      if (d && dim < d->shape.size()) {
        auto ev = detail::try_eval(*d->shape[dim], params());
        extent = ev ? *ev : 1;
      }
      if (iv->i < 0 || iv->i >= extent) {
        set_fault("oob", pe.coord,
                  "index " + std::to_string(iv->i) + " out of bounds for '" +
                      e.name + "'");
        return std::nullopt;
      }
      flat = flat * extent + iv->i;
    }
    if (flat < 0 || flat >= (int64_t)b.v.size()) {
      set_fault("oob", pe.coord, "index out of bounds for '" + e.name + "'");
      return std::nullopt;
    }
    return flat;
  }

  std::string resolve_stream_name(const ast::Stmt& s, PERt& pe, TaskRt& rt) {
    if (s.stream.kind != ast::StreamRef::Kind::RelCond) return s.stream.name;
    auto v = eval(*s.stream.cond, pe, rt);
    if (!v) return s.stream.name;
    return (v->t == ElemType::F32 ? v->f != 0.0f : v->i != 0) ? s.stream.name
                                                              : s.stream.alt;
  }

  // ---- issuing asynchronous operations -------------------------------------

  AsyncOp* new_op(AsyncOp::Kind kind, PERt& pe, BlockRt& blk) {
    AsyncOp op;
    op.kind = kind;
    op.id = (int)ops_.size();
    op.pe = pe.coord;
    ops_.push_back(std::move(op));
    blk.issued.push_back(&ops_.back());
    return &ops_.back();
  }

  int circuit_of(int phase, const std::string& stream, PECoord src) {
    auto key = std::make_tuple(phase, stream, src);
    auto it = circuit_ids_.find(key);
    if (it != circuit_ids_.end()) return it->second;
    int id = (int)circuit_ids_.size();
    circuit_ids_.emplace(key, id);
    return id;
  }

  AsyncOp* issue_send(const ast::Stmt& s, PERt& pe, BlockRt& blk, TaskRt& rt) {
    if (s.stream.kind == ast::StreamRef::Kind::Arg) {
      // host-bound output
      auto* ext = prog_.find_arg(s.stream.name);
      AsyncOp* op = new_op(AsyncOp::Kind::ArgSend, pe, blk);
      op->arg = ext;
      auto idx = eval(*s.stream.arg_index, pe, rt);
      op->slice = idx ? idx->i : 0;
      bind_source(*op, s, pe, rt);
      return op;
    }
    std::string stream = resolve_stream_name(s, pe, rt);
    auto sit = prog_.streams.find({rt.bp->phase_index, stream});
    if (sit == prog_.streams.end()) {
      set_fault("oob", pe.coord, "no stream '" + stream + "'");
      return nullptr;
    }
    const StreamInfo& si = sit->second;
    AsyncOp* op = new_op(AsyncOp::Kind::Send, pe, blk);
    op->phase = rt.bp->phase_index;
    op->stream = stream;
    op->channel = si.channel >= 0 ? si.channel : (int64_t)circuit_of(op->phase, stream, pe.coord);
    op->circuit = circuit_of(op->phase, stream, pe.coord);
    op->path.push_back(pe.coord);
    PECoord cur = pe.coord;
    for (auto [hx, hy] : si.hops) {
      cur = {cur.x + hx, cur.y + hy};
      op->path.push_back(cur);
    }
    bind_source(*op, s, pe, rt);
    return op;
  }

  void bind_source(AsyncOp& op, const ast::Stmt& s, PERt& pe, TaskRt& rt) {
    const ast::Expr& v = *s.value;
    if (v.kind == ast::Expr::Kind::Var) {
      if (Buffer* b = find_buffer(pe, v.name)) {
        op.src_buf = b;
        op.src_off = 0;
        op.count = (int64_t)b->v.size();
        add_span(pe, op, b, 0, op.count, /*write=*/false);
        return;
      }
    }
    if (v.kind == ast::Expr::Kind::Index) {
      if (Buffer* b = find_buffer(pe, v.name)) {
        auto idx = flat_index(v, *b, pe, rt);
        if (!idx) return;
        op.src_buf = b;
        op.src_off = *idx;
        op.count = 1;
        add_span(pe, op, b, *idx, *idx + 1, false);
        return;
      }
    }
    auto val = eval(v, pe, rt);
    op.immediates.push_back(val ? *val : Value{});
    op.count = 1;
  }

  AsyncOp* issue_receive(const ast::Stmt& s, PERt& pe, BlockRt& blk, TaskRt& rt) {
    Buffer* b = nullptr;
    int64_t off = 0, count = 1;
    const ast::Expr& v = *s.value;
    if (v.kind == ast::Expr::Kind::Var) {
      b = find_buffer(pe, v.name);
      if (b) count = (int64_t)b->v.size();
    } else if (v.kind == ast::Expr::Kind::Index) {
      b = find_buffer(pe, v.name);
      if (b) {
        auto idx = flat_index(v, *b, pe, rt);
        if (!idx) return nullptr;
        off = *idx;
        count = 1;
      }
    }
    if (!b) {
      set_fault("oob", pe.coord, "receive target is not addressable storage");
      return nullptr;
    }
    if (s.stream.kind == ast::StreamRef::Kind::Arg) {
      auto* ext = prog_.find_arg(s.stream.name);
      AsyncOp* op = new_op(AsyncOp::Kind::ArgRecv, pe, blk);
      op->arg = ext;
      auto idx = eval(*s.stream.arg_index, pe, rt);
      op->slice = idx ? idx->i : 0;
      op->dst_buf = b;
      op->dst_off = off;
      op->count = count;
      add_span(pe, *op, b, off, off + count, /*write=*/true);
      return op;
    }
    std::string stream = resolve_stream_name(s, pe, rt);
    AsyncOp* op = new_op(AsyncOp::Kind::Recv, pe, blk);
    op->phase = rt.bp->phase_index;
    op->stream = stream;
    op->dst_buf = b;
    op->dst_off = off;
    op->count = count;
    add_span(pe, *op, b, off, off + count, true);
    Consumer c;
    c.op = op;
    c.remaining = count;
    consumers_[{op->phase, stream, pe.coord}].push_back(c);
    return op;
  }

  // ---- bulk map pattern -----------------------------------------------------

  bool bulk_eligible(const ast::Stmt& map) const {
    if (map.body.size() != 1) return false;
    const ast::Stmt& b = *map.body[0];
    if (b.kind != ast::StmtKind::Assign) return false;
    if (b.lhs->kind != ast::Expr::Kind::Index || b.lhs->indices.size() != 1)
      return false;
    bool ok = true;
    ast::walk_exprs(*b.rhs, [&](const ast::Expr& e) {
      if (e.kind == ast::Expr::Kind::Index && e.indices.size() != 1) ok = false;
    });
    return ok;
  }

  // ---- statement execution --------------------------------------------------

  enum class StepResult { Progress, Stall };

  bool op_done(const AsyncOp* op) const {
    return op == nullptr || op->done;
  }

  /// One scheduling step of one task. Returns false without side effects if
  /// the task cannot currently make progress.
  bool step_task(PERt& pe, BlockRt& blk, TaskRt& rt) {
    if (rt.done) return false;
    if (!rt.activated || !rt.unblocked) return false;
    if (rt.waiting_on && !rt.waiting_on->done) return false;
    rt.waiting_on = nullptr;
    if (rt.waiting_all) {
      for (const auto* op : blk.issued)
        if (!op->done) return false;
      rt.waiting_all = false;
    }

    // top-level data task: run the foreach body once per delivered element
    if (rt.task->kind == Task::Kind::Data && rt.frames.empty()) {
      const ast::Stmt* fe = trigger_stmt(rt);
      if (!fe) {
        finish_task(pe, blk, rt);
        return true;
      }
      if (rt.body_open) {
        // body completed: consume the element
        consume_head(pe, rt.bp->phase_index, resolve_stream_name(*fe, pe, rt));
        rt.body_open = false;
        ++rt.consumed;
        touch(pe);
        return true;
      }
      if (rt.consumed >= rt.expected) {
        finish_task(pe, blk, rt);
        touch(pe);
        return true;
      }
      const Wavelet* w = peek_elem(pe, rt.bp->phase_index,
                                   resolve_stream_name(*fe, pe, rt), &rt);
      if (!w) return false;
      // bind loop variables and run the body
      if (!fe->iter_var.empty())
        rt.locals[fe->iter_var] = Value::of_int(fe->iter_type, rt.consumed);
      rt.locals[fe->elem_var] = w->value;
      rt.body_open = true;
      Frame f;
      f.list = &fe->body;
      rt.frames.push_back(f);
      busy(pe, fab_.data_task_dispatch);
      return true;
    }

    if (rt.frames.empty()) {
      if (rt.next_stmt >= (int)rt.task->dag_nodes.size()) {
        // all statements issued; wait for this task's own operations
        for (const auto* op : blk.issued)
          if (!op->done && op_owner_.count(op->id) &&
              op_owner_.at(op->id) == &rt)
            return false;
        finish_task(pe, blk, rt);
        touch(pe);
        return true;
      }
      const auto& node = rt.bp->dag->nodes[rt.task->dag_nodes[rt.next_stmt]];
      ++rt.next_stmt;
      return exec_stmt(*node.stmt, pe, blk, rt);
    }

    Frame& f = rt.frames.back();
    if (f.idx >= f.list->size()) {
      // end of a statement list: loop bookkeeping or pop
      if (f.loop) {
        if (f.is_foreach) {
          if (f.foreach_elem_open) {
            consume_head(pe, rt.bp->phase_index,
                         resolve_stream_name(*f.loop, pe, rt));
            f.foreach_elem_open = false;
            ++f.foreach_seen;
            touch(pe);
            return true;
          }
          if (f.foreach_seen >= f.foreach_expected) {
            rt.frames.pop_back();
            touch(pe);
            return true;
          }
          const Wavelet* w = peek_elem(pe, rt.bp->phase_index,
                                       resolve_stream_name(*f.loop, pe, rt),
                                       &rt);
          if (!w) return false;
          if (!f.loop->iter_var.empty())
            rt.locals[f.loop->iter_var] =
                Value::of_int(f.loop->iter_type, f.foreach_seen);
          rt.locals[f.loop->elem_var] = w->value;
          f.foreach_elem_open = true;
          f.idx = 0;
          busy(pe, 1);
          return true;
        }
        f.it += f.step;
        if (f.it < f.end) {
          rt.locals[f.loop->iter_var] = Value::of_int(f.loop->iter_type, f.it);
          f.idx = 0;
          busy(pe, 1);
          return true;
        }
      }
      rt.frames.pop_back();
      touch(pe);
      return true;
    }
    const ast::Stmt& s = *(*f.list)[f.idx];
    ++f.idx;
    return exec_stmt(s, pe, blk, rt);
  }

  bool exec_stmt(const ast::Stmt& s, PERt& pe, BlockRt& blk, TaskRt& rt) {
    switch (s.kind) {
      case ast::StmtKind::Assign: {
        auto val = eval(*s.rhs, pe, rt);
        if (!val) return true;  // fault set
        if (s.lhs->kind == ast::Expr::Kind::Var) {
          Buffer* b = find_buffer(pe, s.lhs->name);
          if (b) {
            check_access(pe, b, 0, /*write=*/true);
            store(*b, 0, *val);
          } else {
            rt.locals[s.lhs->name] = *val;
          }
        } else {
          Buffer* b = find_buffer(pe, s.lhs->name);
          if (!b) {
            set_fault("oob", pe.coord, "unknown array '" + s.lhs->name + "'");
            return true;
          }
          auto idx = flat_index(*s.lhs, *b, pe, rt);
          if (!idx) return true;
          check_access(pe, b, *idx, true);
          store(*b, *idx, *val);
        }
        busy(pe, fab_.alu_op_latency);
        return true;
      }
      case ast::StmtKind::If: {
        auto c = eval(*s.cond, pe, rt);
        if (!c) return true;
        bool taken = c->t == ElemType::F32 ? c->f != 0.0f : c->i != 0;
        Frame f;
        f.list = taken ? &s.body : &s.else_body;
        rt.frames.push_back(f);
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::For:
      case ast::StmtKind::Map: {
        if (s.kind == ast::StmtKind::Map && bulk_eligible(s)) {
          exec_bulk_map(s, pe, blk, rt);
          return true;
        }
        ParamMap env = params();
        for (const auto& [n, v] : rt.locals)
          if (v.t != ElemType::F32) env[n] = v.i;
        Diagnostics scratch;
        auto r = resolve_range(*s.range, env, scratch);
        if (!r) {
          set_fault("oob", pe.coord, "unresolvable loop range");
          return true;
        }
        if (r->count() == 0) {
          busy(pe, 1);
          return true;
        }
        Frame f;
        f.list = &s.body;
        f.loop = &s;
        f.it = r->lo;
        f.end = r->hi;
        f.step = r->step;
        rt.locals[s.iter_var] = Value::of_int(s.iter_type, r->lo);
        rt.frames.push_back(f);
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::Foreach: {
        // nested foreach executed inline by this task
        ParamMap env = params();
        for (const auto& [n, v] : rt.locals)
          if (v.t != ElemType::F32) env[n] = v.i;
        int64_t expected = -1;
        if (s.range) {
          Diagnostics scratch;
          if (auto r = resolve_range(*s.range, env, scratch))
            expected = r->count();
        }
        if (expected < 0) {
          auto it = prog_.recv_totals.find(
              {rt.bp->phase_index, s.site_id, pe.coord.x, pe.coord.y});
          expected = it == prog_.recv_totals.end() ? 0 : it->second;
        }
        Frame f;
        f.list = &s.body;
        f.idx = s.body.size();  // start at the element boundary
        f.loop = &s;
        f.is_foreach = true;
        f.foreach_expected = expected;
        rt.frames.push_back(f);
        if (expected > 0) {
          Consumer c;
          c.task = &rt;
          c.remaining = expected;
          consumers_[{rt.bp->phase_index, resolve_stream_name(s, pe, rt),
                      pe.coord}]
              .push_back(c);
        }
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::Async: {
        Frame f;
        f.list = &s.body;
        rt.frames.push_back(f);
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::Send: {
        AsyncOp* op = issue_send(s, pe, blk, rt);
        if (op) {
          op_owner_[op->id] = &rt;
          if (!s.completion.empty()) blk.completions[s.completion] = op;
          if (s.awaited) rt.waiting_on = op;
        }
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::Receive: {
        AsyncOp* op = issue_receive(s, pe, blk, rt);
        if (op) {
          op_owner_[op->id] = &rt;
          if (!s.completion.empty()) blk.completions[s.completion] = op;
          if (s.awaited) rt.waiting_on = op;
        }
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::Await: {
        auto it = blk.completions.find(s.await_name);
        if (it != blk.completions.end() && !it->second->done) {
          rt.waiting_on = it->second;
        }
        busy(pe, 1);
        return true;
      }
      case ast::StmtKind::AwaitAll: {
        rt.waiting_all = true;
        busy(pe, 1);
        return true;
      }
    }
    return true;
  }

  void exec_bulk_map(const ast::Stmt& s, PERt& pe, BlockRt& blk, TaskRt& rt) {
    ParamMap env = params();
    for (const auto& [n, v] : rt.locals)
      if (v.t != ElemType::F32) env[n] = v.i;
    Diagnostics scratch;
    auto r = resolve_range(*s.range, env, scratch);
    if (!r) {
      set_fault("oob", pe.coord, "unresolvable map range");
      return;
    }
    const ast::Stmt& body = *s.body[0];
    for (int64_t it = r->lo; it < r->hi; it += r->step) {
      rt.locals[s.iter_var] = Value::of_int(s.iter_type, it);
      auto val = eval(*body.rhs, pe, rt);
      if (!val) return;
      Buffer* b = find_buffer(pe, body.lhs->name);
      if (!b) {
        set_fault("oob", pe.coord, "unknown array '" + body.lhs->name + "'");
        return;
      }
      auto idx = flat_index(*body.lhs, *b, pe, rt);
      if (!idx) return;
      check_access(pe, b, *idx, true);
      store(*b, *idx, *val);
      if (fault_) return;
    }
    int64_t n = r->count();
    uint64_t cycles =
        std::max<int64_t>(1, (n + fab_.bulk_op_throughput - 1) /
                                 fab_.bulk_op_throughput);
    AsyncOp* op = new_op(AsyncOp::Kind::Bulk, pe, blk);
    op->complete_at = cycle_ + cycles;
    op_owner_[op->id] = &rt;
    if (!s.completion.empty()) blk.completions[s.completion] = op;
    if (s.awaited) rt.waiting_on = op;
    busy(pe, (int)cycles);
  }

  void store(Buffer& b, int64_t idx, Value v) {
    Value& cell = b.v[(std::size_t)idx];
    if (b.t == ElemType::F32) {
      cell = Value::of_f32(v.t == ElemType::F32 ? v.f : (float)v.i);
    } else {
      int64_t raw = v.t == ElemType::F32 ? (int64_t)v.f : v.i;
      cell = Value::of_int(b.t, truncate_to(b.t, raw));
    }
  }

  void finish_task(PERt& pe, BlockRt& blk, TaskRt& rt) {
    complete_task(pe, blk, rt);
  }

  void busy(PERt& pe, int cycles) {
    pe.busy_until = cycle_ + (uint64_t)cycles;
    pe.finish_cycle = std::max(pe.finish_cycle, cycle_ + (uint64_t)cycles - 1);
    progressed_ = true;
  }

  void touch(PERt& pe) {
    pe.finish_cycle = std::max(pe.finish_cycle, cycle_);
    progressed_ = true;
  }

  // ---- network --------------------------------------------------------------

  std::optional<Wavelet>& slot(PECoord p, int64_t channel) {
    return slots_[{p, channel}];
  }

  void advance_wavelets() {
    // two-phase simultaneous advance based on start-of-cycle occupancy
    struct Move {
      std::pair<PECoord, int64_t> from, to;
    };
    std::vector<Move> moves;
    std::map<std::pair<PECoord, int64_t>, int> claims;
    for (auto& [key, sl] : slots_) {
      if (!sl || sl->delivered) continue;
      Wavelet& w = *sl;
      int next = w.pos + 1;
      std::pair<PECoord, int64_t> to{(*w.path)[next], key.second};
      auto dst_it = slots_.find(to);
      if (dst_it != slots_.end() && dst_it->second.has_value()) {
        const auto& dst = dst_it->second;
        if (dst->circuit != w.circuit) {
          set_fault("channel-conflict", to.first,
                    "wavelets of two unordered stream edges share channel " +
                        std::to_string(key.second));
          return;
        }
        continue;  // same circuit: first-in-first-out backpressure
      }
      if (++claims[to] > 1) {
        set_fault("channel-conflict", to.first,
                  "two wavelets contend for channel " +
                      std::to_string(key.second));
        return;
      }
      moves.push_back({key, to});
    }
    for (const auto& m : moves) {
      auto& src = slots_[m.from];
      auto& dst = slots_[m.to];
      dst = std::move(src);
      src.reset();
      dst->pos += 1;
      if (dst->pos + 1 == (int)dst->path->size()) dst->delivered = true;
      progressed_ = true;
    }
  }

  void run_send_engines() {
    for (auto& op : ops_) {
      if (op.done) continue;
      if (op.kind == AsyncOp::Kind::Bulk) {
        if (cycle_ + 1 >= op.complete_at) {
          op.done = true;
          progressed_ = true;
        }
        continue;
      }
      if (op.kind != AsyncOp::Kind::Send) continue;
      if (op.moved >= op.count) continue;
      auto& sl = slot(op.path[0], op.channel);
      if (sl.has_value()) {
        if (sl->circuit != op.circuit) {
          set_fault("channel-conflict", op.path[0],
                    "send injection collides with a foreign wavelet on "
                    "channel " + std::to_string(op.channel));
          return;
        }
        continue;
      }
      Wavelet w;
      w.value = op.immediates.empty()
                    ? op.src_buf->v[(std::size_t)(op.src_off + op.moved)]
                    : op.immediates[(std::size_t)op.moved];
      w.circuit = op.circuit;
      w.phase = op.phase;
      w.stream = &op.stream;
      w.path = &op.path;
      w.pos = 0;
      w.delivered = op.path.size() == 1;
      sl = w;
      ++op.moved;
      ++injected_total_;
      progressed_ = true;
      if (op.moved == op.count) {
        op.done = true;  // the send buffer may be reused
        drop_spans(pes_.at(op.pe), op.id);
      }
      touch(pes_.at(op.pe));
    }
  }

  int64_t arg_available(const AsyncOp& op) const {
    auto in = inputs_.find(op.arg->name);
    if (in == inputs_.end()) return 0;
    if (!op.arg->streamed) return op.arg->per_slice;
    return std::min<int64_t>((int64_t)cycle_, op.arg->per_slice);
  }

  void run_arg_engines() {
    for (auto& op : ops_) {
      if (op.done) continue;
      if (op.kind == AsyncOp::Kind::ArgRecv) {
        auto in = inputs_.find(op.arg->name);
        if (in == inputs_.end()) continue;
        auto key = std::make_pair(op.arg->name, op.slice);
        int64_t& cursor = arg_cursor_[key];
        if (cursor >= op.arg->per_slice) continue;
        if (arg_available(op) <= cursor) {
          // streamed data still on its way from the host
          if (op.arg->streamed) progressed_ = true;
          continue;
        }
        Value v = in->second.get(op.slice, cursor);
        store(*op.dst_buf, op.dst_off + op.moved, v);
        ++cursor;
        ++op.moved;
        progressed_ = true;
        touch(pes_.at(op.pe));
        if (op.moved == op.count) {
          op.done = true;
          drop_spans(pes_.at(op.pe), op.id);
        }
      } else if (op.kind == AsyncOp::Kind::ArgSend) {
        auto out = outputs_.find(op.arg->name);
        if (out == outputs_.end()) continue;
        auto key = std::make_pair(op.arg->name, op.slice);
        int64_t& cursor = out_cursor_[key];
        if (cursor >= op.arg->per_slice) {
          set_fault("oob", op.pe,
                    "output slice of '" + op.arg->name + "' overflows");
          return;
        }
        Value v = op.immediates.empty()
                      ? op.src_buf->v[(std::size_t)(op.src_off + op.moved)]
                      : op.immediates[(std::size_t)op.moved];
        out->second.set(op.slice, cursor, v);
        ++cursor;
        ++op.moved;
        progressed_ = true;
        touch(pes_.at(op.pe));
        if (op.moved == op.count) {
          op.done = true;
          drop_spans(pes_.at(op.pe), op.id);
        }
      }
    }
  }

  /// Head-of-queue background receives copy one delivered element per cycle.
  void run_recv_engines() {
    for (auto& [key, queue] : consumers_) {
      if (queue.empty()) continue;
      Consumer& head = queue.front();
      if (!head.op) continue;  // task-driven consumption
      AsyncOp& op = *head.op;
      if (op.done) {
        queue.pop_front();
        continue;
      }
      const auto& [phase, stream, pe] = key;
      auto sit = prog_.streams.find({phase, stream});
      if (sit == prog_.streams.end()) continue;
      int64_t channel = sit->second.channel >= 0
                            ? sit->second.channel
                            : circuit_ids_.count({phase, stream,
                                                  PECoord{pe.x - sit->second.dx,
                                                          pe.y - sit->second.dy}})
                                  ? circuit_ids_.at({phase, stream,
                                                     PECoord{pe.x - sit->second.dx,
                                                             pe.y - sit->second.dy}})
                                  : -1;
      if (channel < 0) continue;
      auto& sl = slot(pe, channel);
      if (!sl || !sl->delivered) continue;
      if (*sl->stream != stream || sl->phase != phase) continue;
      store(*op.dst_buf, op.dst_off + op.moved, sl->value);
      sl.reset();
      ++consumed_total_;
      ++op.moved;
      progressed_ = true;
      touch(pes_.at(op.pe));
      if (op.moved == op.count) {
        op.done = true;
        drop_spans(pes_.at(op.pe), op.id);
        head.remaining = 0;
        queue.pop_front();
      }
    }
  }

  /// An element is consumable by `rt` when it sits delivered in the stream's
  /// slot and rt is the head consumer.
  const Wavelet* peek_elem(PERt& pe, int phase, const std::string& stream,
                           TaskRt* rt) {
    auto cit = consumers_.find({phase, stream, pe.coord});
    if (cit == consumers_.end() || cit->second.empty()) return nullptr;
    Consumer& head = cit->second.front();
    if (head.task != rt) return nullptr;
    auto sit = prog_.streams.find({phase, stream});
    if (sit == prog_.streams.end()) return nullptr;
    int64_t channel = sit->second.channel;
    if (channel < 0) {
      PECoord src{pe.coord.x - sit->second.dx, pe.coord.y - sit->second.dy};
      auto idt = circuit_ids_.find({phase, stream, src});
      if (idt == circuit_ids_.end()) return nullptr;
      channel = idt->second;
    }
    auto& sl = slot(pe.coord, channel);
    if (!sl || !sl->delivered) return nullptr;
    if (*sl->stream != stream || sl->phase != phase) return nullptr;
    return &*sl;
  }

  void consume_head(PERt& pe, int phase, const std::string& stream) {
    auto cit = consumers_.find({phase, stream, pe.coord});
    if (cit == consumers_.end() || cit->second.empty()) return;
    Consumer& head = cit->second.front();
    auto sit = prog_.streams.find({phase, stream});
    if (sit == prog_.streams.end()) return;
    int64_t channel = sit->second.channel;
    if (channel < 0) {
      PECoord src{pe.coord.x - sit->second.dx, pe.coord.y - sit->second.dy};
      auto idt = circuit_ids_.find({phase, stream, src});
      if (idt == circuit_ids_.end()) return;
      channel = idt->second;
    }
    auto& sl = slot(pe.coord, channel);
    if (!sl) return;
    sl.reset();
    ++consumed_total_;
    if (--head.remaining <= 0) cit->second.pop_front();
  }

  // ---- PE scheduling ---------------------------------------------------------

  void step_pes() {
    for (auto& [p, pe] : pes_) {
      if (!pe.block) continue;
      if (pe.busy_until > cycle_) {
        progressed_ = true;
        continue;
      }
      BlockRt& blk = *pe.block;
      // candidates in seeded-random order
      std::vector<int> order(blk.tasks.size());
      for (std::size_t t = 0; t < order.size(); ++t) order[t] = (int)t;
      std::shuffle(order.begin(), order.end(), pe.rng);
      for (int t : order) {
        if (step_task(pe, blk, blk.tasks[t])) break;
        if (fault_) return;
      }
      if (block_done(blk)) advance_block(pe);
    }
  }

  void audit_conservation() {
    int64_t inflight = wavelets_in_flight();
    if (injected_total_ != consumed_total_ + inflight)
      set_fault("internal", {0, 0},
                "wavelet conservation violated: injected " +
                    std::to_string(injected_total_) + " consumed " +
                    std::to_string(consumed_total_) + " in flight " +
                    std::to_string(inflight));
  }

  std::map<int, TaskRt*> op_owner_;
};

inline nlohmann::json SimReport::to_json() const {
  nlohmann::json j;
  std::vector<uint64_t> cycles;
  for (const auto& [p, c] : pe_cycles) cycles.push_back(c);
  std::sort(cycles.begin(), cycles.end());
  nlohmann::json cyc;
  cyc["median"] = cycles.empty() ? 0 : cycles[cycles.size() / 2];
  cyc["total"] = total_cycles;
  j["cycles"] = cyc;
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : faults)
    fs.push_back({{"kind", f.kind},
                  {"pe", {f.pe.x, f.pe.y}},
                  {"cycle", f.cycle},
                  {"detail", f.detail}});
  j["faults"] = fs;
  j["wavelets"] = total_wavelets;
  j["awaiting_input"] = awaiting_input;
  return j;
}

}  // namespace spada
