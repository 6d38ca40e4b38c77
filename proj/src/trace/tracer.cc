#include "clonematch/tracer.h"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

namespace clonematch {

namespace {

// A global value as one particular activation would see it under
// emulation: the first load of `addr` within activation `serial`.
struct TokenRef {
  std::uint32_t serial;
  Word addr;

  friend bool operator==(const TokenRef&, const TokenRef&) = default;
};

struct Access {
  bool migrated = false;  // first access was a load
  bool consumed = false;
  Word value = 0;
};

// Recording state for one frame of the activation chain.
struct ActivationRecord {
  std::size_t function = 0;
  std::uint32_t serial = 0;
  bool recording = false;  // outermost visible activation of its function
  bool via_icall = false;
  std::size_t act = 0;     // index into the function's activation buffers
  std::unordered_map<Word, Access> accessed;
  std::vector<Word> load_order;
};

// Everything one recording activation contributes. Buffers are concatenated
// in activation order, the order in which emulation replays them.
struct ActivationData {
  std::map<int, Word> args;
  Signature signature;
  std::vector<Word> global_reads;
  std::vector<IcallEvent> icall_events;
  std::map<LibFunc, std::vector<Word>> libcall_results;
  std::vector<Word> sub_returns;
};

struct FunctionRecord {
  FunctionEntry function;
  int arg_count = 0;
  std::vector<ActivationData> acts;
};

class TraceRecorder final : public ExecutionHooks {
 public:
  TraceRecorder(const ModuleImage& module, const std::vector<Word>& inputs)
      : module_(module), inputs_(inputs), traces_(module.functions.size()) {}

  Word consume(const Cell& cell) override {
    if (cell.tag == kNoTag) return cell.value;
    const std::size_t floor = eligible_floor();
    for (const TokenRef& tok : token_sets_[cell.tag]) {
      ActivationRecord* rec = find_record(tok.serial, floor);
      if (rec == nullptr) continue;
      auto it = rec->accessed.find(tok.addr);
      if (it == rec->accessed.end() || !it->second.migrated || it->second.consumed) continue;
      it->second.consumed = true;
      data(*rec).global_reads.push_back(it->second.value);
    }
    return cell.value;
  }

  Cell load_global(Word addr, Cell& slot) override {
    const std::size_t floor = eligible_floor();
    std::vector<TokenRef> existing;
    if (slot.tag != kNoTag) existing = token_sets_[slot.tag];
    std::vector<TokenRef> result;
    std::vector<TokenRef> fresh;
    for (std::size_t i = floor; i < records_.size(); ++i) {
      ActivationRecord& rec = records_[i];
      if (!rec.recording) continue;
      auto [it, inserted] = rec.accessed.try_emplace(addr);
      if (inserted) {
        it->second = Access{true, false, slot.value};
        rec.load_order.push_back(addr);
        fresh.push_back({rec.serial, addr});
        result.push_back({rec.serial, addr});
      } else {
        for (const TokenRef& t : existing) {
          if (t.serial == rec.serial) result.push_back(t);
        }
      }
    }
    if (!fresh.empty()) {
      std::vector<TokenRef> updated;
      for (const TokenRef& t : existing) {
        bool replaced = std::any_of(fresh.begin(), fresh.end(),
                                    [&](const TokenRef& f) { return f.serial == t.serial; });
        if (!replaced) updated.push_back(t);
      }
      updated.insert(updated.end(), fresh.begin(), fresh.end());
      slot.tag = intern(std::move(updated));
    }
    if (result.empty()) return Cell{slot.value};
    if (slot.tag != kNoTag && token_sets_[slot.tag] == result) return slot;
    return Cell{slot.value, intern(std::move(result))};
  }

  void store_global(Word addr, const Cell& /*value*/) override {
    for (std::size_t i = eligible_floor(); i < records_.size(); ++i) {
      if (records_[i].recording) records_[i].accessed.try_emplace(addr);
    }
  }

  void on_read_value(const Cell& cell) override { emit(Feature::read(cell.value)); }
  void on_write_value(const Cell& cell) override { emit(Feature::write(cell.value)); }
  void on_compare(Word x, Word y) override { emit(Feature::compare(x, y)); }
  void on_libcall(LibFunc f) override { emit(Feature::libcall(f)); }

  void on_argument_read(int slot, const Cell& cell) override {
    ActivationRecord& rec = records_.back();
    if (!rec.recording) return;
    data(rec).args.try_emplace(slot, cell.value);
  }

  Word system_libcall(LibFunc f, std::span<const Word> args) override {
    Word result = 0;
    switch (f) {
      case LibFunc::kMalloc: {
        // The heap grows up toward a guard page below the stack.
        constexpr Word kHeapLimit = kStackTop - 0x1000;
        const Word n = std::max<Word>(args[0], 1);
        if (n > kHeapLimit - heap_next_) {
          result = 0;
        } else {
          result = heap_next_;
          heap_next_ += n;
        }
        break;
      }
      case LibFunc::kFree: result = 0; break;
      case LibFunc::kReadInt:
        result = input_next_ < inputs_.size() ? inputs_[input_next_] : 0;
        ++input_next_;
        break;
      case LibFunc::kRand: result = rand_stream_value(rand_next_++); break;
      case LibFunc::kTime: result = time_stream_value(time_next_++); break;
      default: break;
    }
    for (std::size_t i = eligible_floor(); i < records_.size(); ++i) {
      if (records_[i].recording) data(records_[i]).libcall_results[f].push_back(result);
    }
    return result;
  }

  void output_libcall(LibFunc /*f*/, std::span<const Word> args) override {
    output_.push_back(args[0]);
  }

  void on_libcall_return(LibFunc /*f*/, Word r0) override {
    for (std::size_t i = eligible_floor(); i < records_.size(); ++i) {
      if (records_[i].recording) data(records_[i]).sub_returns.push_back(r0);
    }
  }

  void on_enter(const Frame& frame) override {
    ActivationRecord rec;
    rec.function = frame.function;
    rec.serial = next_serial_++;
    rec.via_icall = frame.via_icall;
    // Recursion below an indirect call is invisible to the outer activation,
    // so the nested one is emulated, and therefore recorded, on its own.
    const auto visible = records_.begin() + static_cast<std::ptrdiff_t>(eligible_floor());
    rec.recording = frame.via_icall || std::none_of(visible, records_.end(), [&](const auto& r) {
                      return r.function == frame.function;
                    });
    auto& slot = traces_[frame.function];
    if (!slot) {
      slot.emplace();
      slot->function = module_.functions[frame.function];
      slot->arg_count = detect_arg_count(module_, slot->function);
    }
    if (rec.recording) {
      rec.act = slot->acts.size();
      slot->acts.emplace_back();
    }
    records_.push_back(std::move(rec));
  }

  void on_leave(const Frame& frame, const Cell& r0) override {
    ActivationRecord rec = std::move(records_.back());
    records_.pop_back();
    if (rec.recording) flush(rec);
    if (records_.empty()) return;
    for (std::size_t i = eligible_floor(); i < records_.size(); ++i) {
      if (!records_[i].recording) continue;
      ActivationData& ri = data(records_[i]);
      if (frame.via_icall) {
        ri.icall_events.push_back({module_.functions[frame.function].entry, r0.value});
      }
      ri.sub_returns.push_back(r0.value);
    }
  }

  // Closes every activation still open when the run stops early.
  void finish() {
    while (!records_.empty()) {
      if (records_.back().recording) flush(records_.back());
      records_.pop_back();
    }
  }

  TraceSet take(TraceSet base) {
    for (auto& t : traces_) {
      if (!t) continue;
      FunctionTrace out;
      out.function = t->function;
      out.info.arg_count = t->arg_count;
      for (ActivationData& a : t->acts) {
        append(out.signature, a.signature);
        out.info.activations.push_back(std::move(a.args));
        append(out.info.global_reads, a.global_reads);
        append(out.info.icall_events, a.icall_events);
        for (auto& [f, values] : a.libcall_results) append(out.info.libcall_results[f], values);
        append(out.info.sub_returns, a.sub_returns);
      }
      base.functions.push_back(std::move(out));
    }
    base.output = std::move(output_);
    return base;
  }

 private:
  // Records below the innermost indirect-call frame do not see events of the
  // indirectly called subtree: emulation substitutes its return value.
  std::size_t eligible_floor() const {
    for (std::size_t i = records_.size(); i-- > 0;) {
      if (records_[i].via_icall) return i;
    }
    return 0;
  }

  ActivationRecord* find_record(std::uint32_t serial, std::size_t floor) {
    for (std::size_t i = records_.size(); i-- > floor;) {
      if (records_[i].serial == serial) {
        return records_[i].recording ? &records_[i] : nullptr;
      }
    }
    return nullptr;
  }

  template <typename T>
  static void append(std::vector<T>& dst, const std::vector<T>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
  }

  ActivationData& data(const ActivationRecord& rec) {
    return traces_[rec.function]->acts[rec.act];
  }

  // Features belong to the body that produced them. A recursive
  // non-recording activation feeds the recording activation it runs under.
  void emit(const Feature& f) {
    if (records_.empty()) return;
    const std::size_t fn = records_.back().function;
    for (std::size_t i = records_.size(); i-- > 0;) {
      if (records_[i].function == fn && records_[i].recording) {
        data(records_[i]).signature.push_back(f);
        return;
      }
    }
  }

  // Loaded globals never consumed inside the activation are appended in
  // load order, as emulation resolves leftover pending values at its end.
  void flush(ActivationRecord& rec) {
    ActivationData& ri = data(rec);
    for (Word addr : rec.load_order) {
      Access& acc = rec.accessed[addr];
      if (acc.migrated && !acc.consumed) {
        acc.consumed = true;
        ri.global_reads.push_back(acc.value);
      }
    }
  }

  std::int32_t intern(std::vector<TokenRef> set) {
    token_sets_.push_back(std::move(set));
    return static_cast<std::int32_t>(token_sets_.size() - 1);
  }

  const ModuleImage& module_;
  const std::vector<Word>& inputs_;
  std::vector<std::optional<FunctionRecord>> traces_;
  std::vector<ActivationRecord> records_;
  std::vector<std::vector<TokenRef>> token_sets_;
  std::uint32_t next_serial_ = 0;
  std::vector<Word> output_;
  Word heap_next_ = kHeapBase;
  std::size_t input_next_ = 0;
  std::uint64_t rand_next_ = 0;
  std::uint64_t time_next_ = 0;
};

}  // namespace

Word rand_stream_value(std::uint64_t index) {
  // splitmix64 over a fixed seed
  std::uint64_t z = 0x9E3779B97F4A7C15ull * (index + 1) + 0x2545F4914F6CDD1Dull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<Word>(z & 0x7FFFFFFF);
}

Word time_stream_value(std::uint64_t index) {
  return static_cast<Word>(1'700'000'000ull + 17 * index);
}

const FunctionTrace* TraceSet::find(Word entry) const {
  for (const auto& f : functions) {
    if (f.function.entry == entry) return &f;
  }
  return nullptr;
}

const FunctionTrace* TraceSet::find(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.function.name && *f.function.name == name) return &f;
  }
  return nullptr;
}

TraceSet trace_run(const ModuleImage& module, const std::variant<std::string, Word>& entry,
                   const std::vector<Word>& inputs, const TraceLimits& limits) {
  std::optional<std::size_t> fn;
  if (const auto* name = std::get_if<std::string>(&entry)) {
    fn = module.find_function(*name);
    if (!fn) throw TraceError(fmt::format("unknown entry function '{}'", *name));
  } else {
    fn = module.function_entry_at(std::get<Word>(entry));
    if (!fn) {
      throw TraceError(fmt::format("no function starts at {:#x}", std::get<Word>(entry)));
    }
  }

  TraceRecorder recorder(module, inputs);
  Machine machine(module, recorder);
  machine.enter(*fn);
  machine.run(limits.max_steps);
  recorder.finish();

  TraceSet base;
  base.status = machine.state();
  base.fault = machine.fault();
  base.exit_value = machine.reg(Reg::r0).value;
  base.steps = machine.steps();
  base.hit_counts = machine.hit_counts();
  return recorder.take(std::move(base));
}

}  // namespace clonematch
