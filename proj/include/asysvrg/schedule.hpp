#pragma once

// Interleaving schedules for the deterministic simulator.
//
// A schedule is one epoch's ordered list of (worker, SNAPSHOT|APPLY) events.
// SNAPSHOT stamps the read with the current update count a; the matching
// APPLY becomes update m, with delay m - a bounded by tau. An inconsistent
// SNAPSHOT may name the coordinates that read the next iterate u_{a+1}
// instead of u_a (the write in progress while the read was running).
//
// Text form, one event per line, `#` comments allowed:
//   tau 3
//   0 SNAPSHOT
//   1 SNAPSHOT newer=0,4-7
//   0 APPLY
//   1 APPLY

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asysvrg/libsvm.hpp"
#include "asysvrg/rng.hpp"

namespace asysvrg {

enum class Action { Snapshot, Apply };

struct ScheduleEvent {
  unsigned worker = 0;
  Action action = Action::Snapshot;
  std::vector<std::uint32_t> newer;  // SNAPSHOT only: coordinates read at age a+1

  bool operator==(const ScheduleEvent&) const = default;
};

struct Schedule {
  unsigned tau = 0;
  std::vector<ScheduleEvent> events;

  unsigned workers() const {
    unsigned p = 0;
    for (const auto& e : events) p = std::max(p, e.worker + 1);
    return p;
  }
  std::size_t updates() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const auto& e) { return e.action == Action::Apply; }));
  }

  bool operator==(const Schedule&) const = default;
};

class ScheduleError : public std::runtime_error {
 public:
  ScheduleError(std::size_t event, const std::string& reason)
      : std::runtime_error("schedule event " + std::to_string(event) + ": " + reason), event_(event) {}
  std::size_t event() const noexcept { return event_; }

 private:
  std::size_t event_;
};

/// Realized read stamp and delay of every APPLY, in update order.
struct ScheduleDelays {
  std::vector<std::uint64_t> read_stamp;
  std::uint64_t max_delay = 0;
};

/// Checks pairing, mask sanity and the delay bound. `dim` == 0 skips the
/// coordinate range check; `allow_masks` false rejects any mixed read.
inline ScheduleDelays validate_schedule(const Schedule& s, std::size_t dim, bool allow_masks) {
  struct Pending {
    bool active = false;
    std::uint64_t stamp = 0;
    bool mixed = false;
    std::size_t event = 0;
  };
  std::vector<Pending> pending(s.workers());
  ScheduleDelays out;
  std::uint64_t m = 0;
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    const auto& e = s.events[k];
    auto& p = pending[e.worker];
    if (e.action == Action::Snapshot) {
      if (p.active) throw ScheduleError(k, "worker " + std::to_string(e.worker) + " snapshots twice without APPLY");
      if (!e.newer.empty()) {
        if (!allow_masks) throw ScheduleError(k, "mixed-age read in a consistent-read schedule");
        for (std::size_t q = 0; q < e.newer.size(); ++q) {
          if (q > 0 && e.newer[q] <= e.newer[q - 1]) throw ScheduleError(k, "mask coordinates must be increasing");
          if (dim > 0 && e.newer[q] >= dim) throw ScheduleError(k, "mask coordinate out of range");
        }
      }
      p = {true, m, !e.newer.empty(), k};
    } else {
      if (!e.newer.empty()) throw ScheduleError(k, "APPLY cannot carry a mask");
      if (!p.active) throw ScheduleError(k, "worker " + std::to_string(e.worker) + " applies without a SNAPSHOT");
      const std::uint64_t delay = m - p.stamp;
      if (delay > s.tau)
        throw ScheduleError(k, "delay " + std::to_string(delay) + " exceeds tau " + std::to_string(s.tau));
      if (p.mixed && delay < 1)
        throw ScheduleError(p.event, "mixed read needs another update between SNAPSHOT and APPLY");
      out.read_stamp.push_back(p.stamp);
      out.max_delay = std::max(out.max_delay, delay);
      p.active = false;
      ++m;
    }
  }
  for (std::size_t w = 0; w < pending.size(); ++w)
    if (pending[w].active) throw ScheduleError(pending[w].event, "worker " + std::to_string(w) + " never applies");
  return out;
}

/// Strict alternation SNAPSHOT/APPLY for one worker: the zero-delay schedule.
inline Schedule sequential_schedule(std::size_t updates) {
  Schedule s;
  for (std::size_t k = 0; k < updates; ++k) {
    s.events.push_back({0, Action::Snapshot, {}});
    s.events.push_back({0, Action::Apply, {}});
  }
  return s;
}

enum class MaskPolicy { None, Random, AllNewer };

struct ScheduleSpec {
  unsigned workers = 1;
  std::size_t updates_per_worker = 1;
  unsigned tau = 0;
  /// Prefer SNAPSHOT whenever allowed, which drives delays up to the bound.
  bool saturate = false;
  MaskPolicy masks = MaskPolicy::None;
};

/// Random tau-feasible interleaving. Pending reads are kept oldest-first;
/// the i-th oldest can apply no earlier than update m + i, so the state is
/// feasible iff m + i - stamp_i <= tau for all i. Applying the oldest read
/// always preserves feasibility, so generation never dead-ends.
inline Schedule random_schedule(const ScheduleSpec& spec, std::size_t dim, Rng& rng) {
  Schedule s;
  s.tau = spec.tau;
  const unsigned p = spec.workers;
  std::vector<std::size_t> remaining(p, spec.updates_per_worker);
  struct Read {
    unsigned worker;
    std::uint64_t stamp;
    std::size_t event;
  };
  std::vector<Read> pending;
  std::vector<char> busy(p, 0);
  std::uint64_t m = 0;

  auto feasible_after_apply = [&](std::size_t q) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      if (k == q) continue;
      if (m + 1 + idx - pending[k].stamp > spec.tau) return false;
      ++idx;
    }
    return true;
  };

  struct Choice {
    Action action;
    unsigned worker;
    std::size_t slot;
  };
  std::vector<Choice> choices;
  while (true) {
    choices.clear();
    std::vector<Choice> snaps;
    if (pending.size() <= spec.tau)
      for (unsigned w = 0; w < p; ++w)
        if (!busy[w] && remaining[w] > 0) snaps.push_back({Action::Snapshot, w, 0});
    std::vector<Choice> applies;
    for (std::size_t q = 0; q < pending.size(); ++q)
      if (feasible_after_apply(q)) applies.push_back({Action::Apply, pending[q].worker, q});
    if (snaps.empty() && applies.empty()) break;
    if (spec.saturate && !snaps.empty())
      choices = snaps;
    else if (spec.saturate)
      choices = {applies.front()};
    else {
      choices = snaps;
      choices.insert(choices.end(), applies.begin(), applies.end());
    }
    const auto pick = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    if (pick.action == Action::Snapshot) {
      busy[pick.worker] = 1;
      pending.push_back({pick.worker, m, s.events.size()});
      s.events.push_back({pick.worker, Action::Snapshot, {}});
    } else {
      const Read read = pending[pick.slot];
      pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick.slot));
      busy[read.worker] = 0;
      --remaining[read.worker];
      s.events.push_back({read.worker, Action::Apply, {}});
      // A read overlapping at least one later write may mix ages a and a+1.
      if (spec.masks != MaskPolicy::None && m > read.stamp && dim > 0) {
        auto& newer = s.events[read.event].newer;
        std::bernoulli_distribution coin(0.5);
        for (std::uint32_t j = 0; j < dim; ++j)
          if (spec.masks == MaskPolicy::AllNewer || coin(rng)) newer.push_back(j);
      }
      ++m;
    }
  }
  return s;
}

namespace detail {

inline std::vector<std::uint32_t> parse_mask(std::string_view spec, std::size_t line) {
  std::vector<std::uint32_t> out;
  std::size_t pos = 0;
  auto number = [&](std::string_view tok) {
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
      throw ParseError(line, "bad mask coordinate '" + std::string(tok) + "'");
    return v;
  };
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto item = spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    const auto dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(number(item));
    } else {
      const auto a = number(item.substr(0, dash)), b = number(item.substr(dash + 1));
      if (b < a) throw ParseError(line, "descending mask range");
      for (std::uint32_t j = a; j <= b; ++j) out.push_back(j);
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline Schedule parse_schedule(std::istream& in) {
  Schedule s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto toks = detail::split_tokens(line);
    if (toks.empty()) continue;
    if (toks[0] == "tau") {
      if (toks.size() != 2) throw ParseError(line_no, "expected 'tau <n>'");
      s.tau = static_cast<unsigned>(std::stoul(std::string(toks[1])));
      continue;
    }
    if (toks.size() < 2 || toks.size() > 3) throw ParseError(line_no, "expected 'worker action [newer=...]'");
    ScheduleEvent e;
    unsigned w = 0;
    const auto [ptr, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), w);
    if (ec != std::errc() || ptr != toks[0].data() + toks[0].size())
      throw ParseError(line_no, "bad worker id '" + std::string(toks[0]) + "'");
    e.worker = w;
    if (toks[1] == "SNAPSHOT")
      e.action = Action::Snapshot;
    else if (toks[1] == "APPLY")
      e.action = Action::Apply;
    else
      throw ParseError(line_no, "unknown action '" + std::string(toks[1]) + "'");
    if (toks.size() == 3) {
      if (e.action != Action::Snapshot || toks[2].substr(0, 6) != "newer=")
        throw ParseError(line_no, "only SNAPSHOT takes a 'newer=' mask");
      e.newer = detail::parse_mask(toks[2].substr(6), line_no);
      std::sort(e.newer.begin(), e.newer.end());
      e.newer.erase(std::unique(e.newer.begin(), e.newer.end()), e.newer.end());
    }
    s.events.push_back(std::move(e));
  }
  return s;
}

inline Schedule parse_schedule(const std::string& text) {
  std::istringstream in(text);
  return parse_schedule(in);
}

inline void write_schedule(std::ostream& out, const Schedule& s) {
  out << "tau " << s.tau << '\n';
  for (const auto& e : s.events) {
    out << e.worker << (e.action == Action::Snapshot ? " SNAPSHOT" : " APPLY");
    if (!e.newer.empty()) {
      out << " newer=";
      for (std::size_t q = 0; q < e.newer.size(); ++q) out << (q ? "," : "") << e.newer[q];
    }
    out << '\n';
  }
}

}  // namespace asysvrg
