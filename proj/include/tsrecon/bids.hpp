#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"

namespace tsrecon {

struct HourlyOffer {
  int hour = 0;
  double price_usd_per_mw = 0.0;
  double max_mw = 0.0;
  double min_mw = 0.0;
};

struct Participant {
  std::string id;
  std::string fuel;
  double capacity_mw = 0.0;  // largest observed max_mw bid
  std::vector<HourlyOffer> offers;  // sorted by hour
  std::map<std::string, std::string> attributes;  // opaque extras carried from the file
};

struct OfferBook {
  std::vector<Participant> participants;  // sorted by id
  // generator id -> participant index, filled by match()
  std::map<std::string, int> assignment;

  const Participant& participant(const std::string& id) const {
    for (const auto& p : participants)
      if (p.id == id) return p;
    throw_validation("unknown participant '" + id + "'");
  }
};

// Raw offer rows as they appear in the file; ingestion lives in io.hpp.
struct OfferRow {
  std::string participant_id;
  int hour = 0;
  std::string fuel;
  double price_usd_per_mw = 0.0;
  double max_mw = 0.0;
  double min_mw = 0.0;
  std::map<std::string, std::string> extras;
};

// Fold rows into per-participant summaries. Fuel is declared per row and
// must be consistent; capacity is the largest observed bid quantity.
inline OfferBook infer_participants(const std::vector<OfferRow>& rows) {
  std::map<std::string, Participant> by_id;
  for (const OfferRow& r : rows) {
    auto [it, inserted] = by_id.try_emplace(r.participant_id);
    Participant& p = it->second;
    if (inserted) {
      p.id = r.participant_id;
      p.fuel = r.fuel;
      p.attributes = r.extras;
    } else if (p.fuel != r.fuel) {
      throw_validation("participant '" + r.participant_id + "' declares conflicting fuels '" +
                       p.fuel + "' and '" + r.fuel + "'");
    }
    if (!std::isfinite(r.price_usd_per_mw))
      throw_validation("participant '" + r.participant_id + "' has non-finite price at hour " +
                       std::to_string(r.hour));
    p.capacity_mw = std::max(p.capacity_mw, r.max_mw);
    p.offers.push_back({r.hour, r.price_usd_per_mw, r.max_mw, r.min_mw});
  }
  OfferBook book;
  for (auto& [id, p] : by_id) {
    if (p.offers.empty()) throw_validation("participant '" + id + "' has no offers");
    std::sort(p.offers.begin(), p.offers.end(),
              [](const HourlyOffer& a, const HourlyOffer& b) { return a.hour < b.hour; });
    book.participants.push_back(std::move(p));
  }
  return book;
}

struct MatchPolicy {
  // fuel of generator -> fuel class to draw participants from when the
  // generator's own class has no participants
  std::map<std::string, std::string> substitutions;
  // when true, a participant may only serve generators at least as large
  // as its own estimated capacity
  bool external_capacity_filter = false;
};

struct MatchLogEntry {
  std::string generator_id;
  std::string participant_id;
  std::string requested_fuel;
  std::string used_fuel;  // differs from requested_fuel when a substitution fired
  double capacity_gap_mw = 0.0;
};

// For each generator, pick the same-fuel participant with the nearest
// capacity; participants are reusable. Generators are processed in id order
// and ties break on participant id, so the result is deterministic.
inline std::vector<MatchLogEntry> match(OfferBook& book, const NetworkSnapshot& snapshot,
                                        const MatchPolicy& policy = {}) {
  std::vector<const Generator*> gens;
  for (const Generator& g : snapshot.generators) gens.push_back(&g);
  std::sort(gens.begin(), gens.end(),
            [](const Generator* a, const Generator* b) { return a->id < b->id; });

  std::vector<MatchLogEntry> log;
  book.assignment.clear();
  for (const Generator* g : gens) {
    std::string fuel = g->fuel;
    bool class_present = std::any_of(book.participants.begin(), book.participants.end(),
                                     [&](const Participant& p) { return p.fuel == fuel; });
    if (!class_present) {
      auto sub = policy.substitutions.find(g->fuel);
      if (sub == policy.substitutions.end())
        throw_validation("no participant offers fuel '" + g->fuel + "' needed by generator '" +
                         g->id + "' and no substitution rule covers it");
      fuel = sub->second;
    }
    int best = -1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < book.participants.size(); ++i) {
      const Participant& p = book.participants[i];
      if (p.fuel != fuel) continue;
      if (policy.external_capacity_filter && g->p_max_mw < p.capacity_mw) continue;
      double gap = std::abs(g->p_max_mw - p.capacity_mw);
      if (gap < best_gap) {  // participants sorted by id, first wins ties
        best_gap = gap;
        best = static_cast<int>(i);
      }
    }
    if (best < 0)
      throw_validation("no eligible participant for generator '" + g->id + "' (fuel '" + fuel +
                       "')");
    book.assignment[g->id] = best;
    log.push_back({g->id, book.participants[best].id, g->fuel, fuel, best_gap});
  }
  return log;
}

struct GeneratorOffer {
  std::string generator_id;
  std::vector<HourlyOffer> hourly;  // horizon entries, hour 0..H-1
};

// Each generator inherits its participant's hourly series. Quantities are
// rescaled by p_max(gen)/capacity(participant); prices are per-MW and stay
// as observed.
inline std::vector<GeneratorOffer> offer_series(const OfferBook& book,
                                                const NetworkSnapshot& snapshot, int horizon_hours) {
  std::map<std::string, const Generator*> gen_by_id;
  for (const Generator& g : snapshot.generators) gen_by_id[g.id] = &g;

  std::vector<GeneratorOffer> out;
  for (const auto& [gen_id, part_idx] : book.assignment) {
    const Participant& p = book.participants[part_idx];
    const Generator* g = gen_by_id.at(gen_id);
    double ratio = p.capacity_mw > 0 ? g->p_max_mw / p.capacity_mw : 0.0;
    GeneratorOffer go;
    go.generator_id = gen_id;
    go.hourly.reserve(horizon_hours);
    std::map<int, const HourlyOffer*> by_hour;
    for (const HourlyOffer& o : p.offers) by_hour[o.hour] = &o;
    for (int h = 0; h < horizon_hours; ++h) {
      auto it = by_hour.find(h);
      if (it == by_hour.end())
        throw_validation("participant '" + p.id + "' has no offer for hour " + std::to_string(h) +
                         " required by the horizon");
      const HourlyOffer& o = *it->second;
      go.hourly.push_back({h, o.price_usd_per_mw, o.max_mw * ratio, o.min_mw * ratio});
    }
    out.push_back(std::move(go));
  }
  return out;
}

}  // namespace tsrecon
