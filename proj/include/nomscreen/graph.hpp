#pragma once

// Immutable director / company / address / owner graph and depth-two
// ego-network extraction.
//
// All node vectors are sorted by id and all adjacency lists by edge key, so
// every traversal is independent of the order of the input records.

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nomscreen/address.hpp"
#include "nomscreen/registry.hpp"

namespace nomscreen {

using NodeIndex = uint32_t;

struct DirectorNode {
    std::string id;
    std::string name;
    std::optional<std::string> company_id;  // set for corporate directors
    bool is_corporate() const { return company_id.has_value(); }
};

struct OwnerNode {
    std::string id;
    std::optional<std::string> country;
};

enum class AddressRole { Office, Postal };

inline const char* to_string(AddressRole r) { return r == AddressRole::Office ? "office" : "postal"; }

struct DirectorshipEdge {
    NodeIndex director;
    NodeIndex company;
    Status status;
    std::optional<std::string> title;
};

struct LocatedEdge {
    NodeIndex company;
    NodeIndex address;
    AddressRole role;
    Status status;
};

struct OwnedEdge {
    NodeIndex company;
    NodeIndex owner;
};

struct GraphBuildReport {
    size_t dropped_directorships = 0;   // unknown company
    size_t dropped_events = 0;          // unknown company
    size_t inconsistent_director_names = 0;
    PreviousAddressDiagnostics previous_addresses;
};

class EntityGraph {
public:
    static EntityGraph build(const Registry& reg) {
        return build(reg.companies, reg.directorships, reg.events);
    }

    static EntityGraph build(const std::vector<CompanyRecord>& companies,
                             const std::vector<DirectorshipRecord>& directorships,
                             const std::vector<LegalEvent>& events) {
        EntityGraph g;
        g.companies_ = companies;
        std::sort(g.companies_.begin(), g.companies_.end(),
                  [](const auto& a, const auto& b) { return a.company_id < b.company_id; });
        for (NodeIndex i = 0; i < g.companies_.size(); ++i) {
            auto [it, fresh] = g.company_index_.emplace(g.companies_[i].company_id, i);
            if (!fresh) throw Error("duplicate company id: " + g.companies_[i].company_id);
        }

        // Directors: deterministic name/corporate flag from the smallest record.
        std::vector<const DirectorshipRecord*> ds;
        ds.reserve(directorships.size());
        for (const auto& d : directorships) ds.push_back(&d);
        std::sort(ds.begin(), ds.end(), [](const auto* a, const auto* b) {
            return std::tie(a->director_id, a->company_id, a->status) <
                   std::tie(b->director_id, b->company_id, b->status);
        });
        for (const auto* d : ds) {
            if (!g.company_index_.count(d->company_id)) {
                ++g.report_.dropped_directorships;
                continue;
            }
            auto it = g.director_index_.find(d->director_id);
            if (it == g.director_index_.end()) {
                g.director_index_.emplace(d->director_id, 0);
                g.directors_.push_back({d->director_id, d->director_name, d->director_company_id});
            } else if (g.directors_.back().name != d->director_name) {
                ++g.report_.inconsistent_director_names;
            }
        }
        for (NodeIndex i = 0; i < g.directors_.size(); ++i) g.director_index_[g.directors_[i].id] = i;
        for (const auto* d : ds) {
            auto c = g.company_index_.find(d->company_id);
            if (c == g.company_index_.end()) continue;
            auto dir = g.director_index_.at(d->director_id);
            if (!g.directorships_.empty()) {
                const auto& last = g.directorships_.back();
                if (last.director == dir && last.company == c->second && last.status == d->status) continue;
            }
            g.directorships_.push_back({dir, c->second, d->status, d->title});
        }

        // Addresses: current office/postal plus joinable previous addresses.
        std::map<std::string, std::vector<AddressKey>> previous;
        {
            std::vector<LegalEvent> known;
            for (const auto& e : events) {
                if (g.company_index_.count(e.company_id)) known.push_back(e);
                else ++g.report_.dropped_events;
            }
            previous = extract_previous_addresses(known, &g.report_.previous_addresses);
        }
        std::set<AddressKey> addr_set;
        for (const auto& c : g.companies_) {
            if (c.office_address) addr_set.insert(*c.office_address);
            if (c.postal_address) addr_set.insert(*c.postal_address);
        }
        for (const auto& [cid, list] : previous)
            for (const auto& a : list)
                if (a.joinable()) addr_set.insert(a);
        g.addresses_.assign(addr_set.begin(), addr_set.end());
        for (NodeIndex i = 0; i < g.addresses_.size(); ++i) g.address_index_.emplace(g.addresses_[i].id(), i);

        g.previous_addresses_.resize(g.companies_.size());
        for (NodeIndex ci = 0; ci < g.companies_.size(); ++ci) {
            const auto& c = g.companies_[ci];
            if (c.office_address)
                g.located_.push_back({ci, g.address_index_.at(c.office_address->id()), AddressRole::Office,
                                      Status::Current});
            if (c.postal_address)
                g.located_.push_back({ci, g.address_index_.at(c.postal_address->id()), AddressRole::Postal,
                                      Status::Current});
            if (auto it = previous.find(c.company_id); it != previous.end()) {
                g.previous_addresses_[ci] = it->second;
                std::set<NodeIndex> seen;
                for (const auto& a : it->second) {
                    if (!a.joinable()) continue;
                    auto ai = g.address_index_.at(a.id());
                    if (seen.insert(ai).second)
                        g.located_.push_back({ci, ai, AddressRole::Office, Status::Previous});
                }
            }
        }

        // Owners: one GUO edge per company; a company that is its own GUO has none.
        std::map<std::string, std::optional<std::string>> owners;
        for (const auto& c : g.companies_) {
            if (!c.guo_id || *c.guo_id == c.company_id) continue;
            owners.emplace(*c.guo_id, c.guo_country);
        }
        for (const auto& [id, country] : owners) {
            g.owner_index_.emplace(id, static_cast<NodeIndex>(g.owners_.size()));
            g.owners_.push_back({id, country});
        }
        for (NodeIndex ci = 0; ci < g.companies_.size(); ++ci) {
            const auto& c = g.companies_[ci];
            if (!c.guo_id || *c.guo_id == c.company_id) continue;
            g.owned_.push_back({ci, g.owner_index_.at(*c.guo_id)});
        }

        g.index_adjacency();
        return g;
    }

    const std::vector<DirectorNode>& directors() const { return directors_; }
    const std::vector<CompanyRecord>& companies() const { return companies_; }
    const std::vector<AddressKey>& addresses() const { return addresses_; }
    const std::vector<OwnerNode>& owners() const { return owners_; }
    const std::vector<DirectorshipEdge>& directorships() const { return directorships_; }
    const std::vector<LocatedEdge>& located() const { return located_; }
    const std::vector<OwnedEdge>& owned() const { return owned_; }
    const GraphBuildReport& report() const { return report_; }

    size_t node_count() const { return directors_.size() + companies_.size() + addresses_.size() + owners_.size(); }
    size_t edge_count() const { return directorships_.size() + located_.size() + owned_.size(); }

    std::optional<NodeIndex> director(std::string_view id) const { return find(director_index_, id); }
    std::optional<NodeIndex> company(std::string_view id) const { return find(company_index_, id); }
    std::optional<NodeIndex> address(const AddressKey& a) const { return find(address_index_, a.id()); }
    std::optional<NodeIndex> owner(std::string_view id) const { return find(owner_index_, id); }

    // Edge indices, sorted.
    const std::vector<uint32_t>& positions_of(NodeIndex director) const { return director_edges_[director]; }
    const std::vector<uint32_t>& directors_of(NodeIndex company) const { return company_directorships_[company]; }
    const std::vector<uint32_t>& locations_of(NodeIndex company) const { return company_located_[company]; }
    std::optional<NodeIndex> owner_of(NodeIndex company) const { return company_owner_[company]; }
    // Companies whose current office (or postal) address is this address.
    size_t companies_at(NodeIndex address, AddressRole role) const {
        return role == AddressRole::Office ? office_count_[address] : postal_count_[address];
    }
    const std::vector<AddressKey>& previous_addresses(NodeIndex company) const { return previous_addresses_[company]; }

    std::optional<NodeIndex> current_address(NodeIndex company, AddressRole role) const {
        for (auto e : company_located_[company]) {
            const auto& l = located_[e];
            if (l.role == role && l.status == Status::Current) return l.address;
        }
        return std::nullopt;
    }

    // Companies the director currently (or, optionally, ever) holds a position in.
    std::vector<NodeIndex> managed_companies(NodeIndex director, bool include_previous = false) const {
        std::vector<NodeIndex> out;
        for (auto e : director_edges_[director]) {
            const auto& d = directorships_[e];
            if (d.status == Status::Current || include_previous) out.push_back(d.company);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    static std::string node_id(char kind, const std::string& id) { return std::string(1, kind) + ":" + id; }

    // JSON-lines dumps consumed by the annotation console.
    void write_nodes_jsonl(std::ostream& out) const {
        for (const auto& d : directors_) {
            nlohmann::json j{{"id", node_id('D', d.id)}, {"type", "director"}, {"name", d.name},
                             {"corporate", d.is_corporate()}};
            if (d.company_id) j["company_id"] = *d.company_id;
            out << j.dump() << '\n';
        }
        for (const auto& c : companies_) {
            nlohmann::json j{{"id", node_id('C', c.company_id)}, {"type", "company"}, {"name", c.name},
                             {"legal_form", c.legal_form.label()}, {"nace", c.nace.value_or("")}};
            out << j.dump() << '\n';
        }
        for (const auto& a : addresses_) {
            nlohmann::json j{{"id", node_id('A', a.id())}, {"type", "address"}, {"postcode", a.postcode},
                             {"number", a.street_number}, {"street", a.street}, {"city", a.city}};
            out << j.dump() << '\n';
        }
        for (const auto& o : owners_) {
            nlohmann::json j{{"id", node_id('O', o.id)}, {"type", "owner"}, {"country", o.country.value_or("")}};
            out << j.dump() << '\n';
        }
    }

    void write_edges_jsonl(std::ostream& out) const {
        for (const auto& d : directorships_) out << directorship_json(d).dump() << '\n';
        for (const auto& l : located_) out << located_json(l).dump() << '\n';
        for (const auto& o : owned_) out << owned_json(o).dump() << '\n';
    }

    nlohmann::json directorship_json(const DirectorshipEdge& d) const {
        return {{"type", "directorship"}, {"source", node_id('D', directors_[d.director].id)},
                {"target", node_id('C', companies_[d.company].company_id)}, {"status", to_string(d.status)},
                {"title", d.title.value_or("")}};
    }
    nlohmann::json located_json(const LocatedEdge& l) const {
        return {{"type", "located_at"}, {"source", node_id('C', companies_[l.company].company_id)},
                {"target", node_id('A', addresses_[l.address].id())}, {"role", to_string(l.role)},
                {"status", to_string(l.status)}};
    }
    nlohmann::json owned_json(const OwnedEdge& o) const {
        return {{"type", "owned_by"}, {"source", node_id('C', companies_[o.company].company_id)},
                {"target", node_id('O', owners_[o.owner].id)}, {"country", owners_[o.owner].country.value_or("")}};
    }

private:
    template <class Map>
    static std::optional<NodeIndex> find(const Map& m, std::string_view id) {
        auto it = m.find(std::string(id));
        if (it == m.end()) return std::nullopt;
        return it->second;
    }

    void index_adjacency() {
        director_edges_.assign(directors_.size(), {});
        company_directorships_.assign(companies_.size(), {});
        company_located_.assign(companies_.size(), {});
        company_owner_.assign(companies_.size(), std::nullopt);
        office_count_.assign(addresses_.size(), 0);
        postal_count_.assign(addresses_.size(), 0);
        for (uint32_t e = 0; e < directorships_.size(); ++e) {
            director_edges_[directorships_[e].director].push_back(e);
            company_directorships_[directorships_[e].company].push_back(e);
        }
        for (uint32_t e = 0; e < located_.size(); ++e) {
            const auto& l = located_[e];
            company_located_[l.company].push_back(e);
            if (l.status == Status::Current) {
                if (l.role == AddressRole::Office) ++office_count_[l.address];
                else ++postal_count_[l.address];
            }
        }
        for (const auto& o : owned_) company_owner_[o.company] = o.owner;
    }

    std::vector<DirectorNode> directors_;
    std::vector<CompanyRecord> companies_;
    std::vector<AddressKey> addresses_;
    std::vector<OwnerNode> owners_;
    std::vector<DirectorshipEdge> directorships_;
    std::vector<LocatedEdge> located_;
    std::vector<OwnedEdge> owned_;
    std::vector<std::vector<AddressKey>> previous_addresses_;

    std::unordered_map<std::string, NodeIndex> director_index_, company_index_, address_index_, owner_index_;
    std::vector<std::vector<uint32_t>> director_edges_, company_directorships_, company_located_;
    std::vector<std::optional<NodeIndex>> company_owner_;
    std::vector<size_t> office_count_, postal_count_;
    GraphBuildReport report_;
};

struct EligibilityConfig {
    size_t min_positions = 3;
    bool count_previous = false;
};

// Directors holding at least min_positions positions (current only by default).
inline std::vector<NodeIndex> eligible_directors(const EntityGraph& g, const EligibilityConfig& cfg = {}) {
    std::vector<NodeIndex> out;
    for (NodeIndex d = 0; d < g.directors().size(); ++d)
        if (g.managed_companies(d, cfg.count_previous).size() >= cfg.min_positions) out.push_back(d);
    return out;
}

struct EgoNetwork {
    NodeIndex center = 0;
    std::vector<NodeIndex> companies;     // current directorships of center
    std::vector<NodeIndex> addresses;     // current and previous, of those companies
    std::vector<NodeIndex> owners;
    std::vector<NodeIndex> co_directors;  // current and previous, excluding center
    std::vector<uint32_t> directorship_edges;
    std::vector<uint32_t> located_edges;
    std::vector<OwnedEdge> owned_edges;
};

inline EgoNetwork ego(const EntityGraph& g, NodeIndex center) {
    if (center >= g.directors().size()) throw Error("unknown director index");
    EgoNetwork e;
    e.center = center;
    e.companies = g.managed_companies(center);
    std::set<NodeIndex> addrs, owners, co;
    std::set<uint32_t> dedges, ledges;
    for (auto c : e.companies) {
        for (auto de : g.directors_of(c)) {
            dedges.insert(de);
            auto d = g.directorships()[de].director;
            if (d != center) co.insert(d);
        }
        for (auto le : g.locations_of(c)) {
            ledges.insert(le);
            addrs.insert(g.located()[le].address);
        }
        if (auto o = g.owner_of(c)) {
            owners.insert(*o);
            e.owned_edges.push_back({c, *o});
        }
    }
    e.addresses.assign(addrs.begin(), addrs.end());
    e.owners.assign(owners.begin(), owners.end());
    e.co_directors.assign(co.begin(), co.end());
    e.directorship_edges.assign(dedges.begin(), dedges.end());
    e.located_edges.assign(ledges.begin(), ledges.end());
    return e;
}

inline EgoNetwork ego(const EntityGraph& g, std::string_view director_id) {
    auto d = g.director(director_id);
    if (!d) throw Error("unknown director: " + std::string(director_id));
    return ego(g, *d);
}

// Ultimate owner when recorded, else the company itself. Owner and company
// ids share one key space, so a managed company that also owns another
// managed company counts once.
inline std::set<std::string> independent_companies(const EntityGraph& g, const EgoNetwork& e) {
    std::set<std::string> reps;
    for (auto c : e.companies) {
        if (auto o = g.owner_of(c)) reps.insert(g.owners()[*o].id);
        else reps.insert(g.companies()[c].company_id);
    }
    return reps;
}

} // namespace nomscreen
