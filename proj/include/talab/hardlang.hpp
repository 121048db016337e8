#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace talab {

using Element = std::uint32_t;
using Letter = std::uint32_t;
using Word = std::vector<Letter>;

inline constexpr std::size_t kMaxMonoidSize = 256;  // associativity is verified exhaustively up to here

class FiniteMonoid {
public:
    // Checks shape, identity laws and associativity (all triples); BadTable on failure.
    static FiniteMonoid make(const std::vector<std::vector<Element>>& table, Element identity,
                             std::string name = "custom");

    std::size_t size() const { return n_; }
    Element identity() const { return identity_; }
    const std::string& name() const { return name_; }
    Element op(Element a, Element b) const { return table_[a * n_ + b]; }
    bool is_idempotent(Element e) const { return op(e, e) == e; }
    std::vector<std::vector<Element>> table() const;

    nlohmann::json to_json() const;
    static FiniteMonoid from_json(const nlohmann::json& j);

private:
    FiniteMonoid() = default;
    std::size_t n_ = 0;
    Element identity_ = 0;
    std::vector<Element> table_;
    std::string name_;
};

// Addition mod k.
FiniteMonoid cyclic_group(std::size_t k);
// Permutations of {0..k-1}, k <= 5, composed as (f o g)(x) = f(g(x)).
// Elements are indexed in lexicographic order of their images, so 0 is the identity.
FiniteMonoid symmetric_group(std::size_t k);
std::vector<Element> permutation_of(std::size_t k, Element e);
Element element_of(const std::vector<Element>& perm);

struct Morphism {
    FiniteMonoid target;
    std::vector<Element> images;      // letter id -> element
    std::vector<std::string> names;   // printable letter names, same length

    std::size_t letters() const { return images.size(); }
    Element image(Letter a) const;
    Word parse(const std::string& s) const;  // one character per letter name
    std::string render(const Word& w) const;
};

Morphism make_morphism(FiniteMonoid target, std::vector<Element> images, std::vector<std::string> names = {});
// Every element as its own letter.
Morphism element_morphism(FiniteMonoid target);

// Built-in setups by name: z2 (a->1, b->0), s3 (a->(0 1), b->(0 1 2)), s5 (a->(0 1), b->(0 1 2 3 4)).
Morphism builtin_morphism(const std::string& name);
std::vector<std::string> builtin_names();

Element monoid_eval(const Morphism& h, const Word& w);
Element monoid_eval(const Morphism& h, const Word& w, std::size_t begin, std::size_t end);

struct ClosureInstance {
    Morphism h;
    std::set<Element> accept;
    std::size_t r = 1;
    Word s;
};

inline constexpr std::size_t kMaxClosureLength = 1'000'000;
inline constexpr std::size_t kMaxBruteLength = 14;

bool closure_decide(const ClosureInstance& inst);
bool closure_brute(const ClosureInstance& inst);

// Smallest k >= 1 with t^k idempotent, and that idempotent.
std::pair<std::size_t, Element> idempotent_power(const FiniteMonoid& m, Element t);

using LinkedPair = std::pair<Element, Element>;

std::set<LinkedPair> linked_pairs(const Morphism& h, const Word& u, const Word& v);

struct MembershipInstance {
    Morphism h;
    std::set<LinkedPair> accept;
    Word u;
    Word v;
};

// Linked pairs of uv^w read from every phase of the period: the union of
// linked_pairs(h, u v[0:j), v[j:] v[0:j)) over 0 <= j < |v|.
std::set<LinkedPair> omega_pairs(const Morphism& h, const Word& u, const Word& v);
bool membership_decide(const MembershipInstance& inst);

// Linked pairs (s, e) with s in `heads`.
std::set<LinkedPair> pairs_with_heads(const FiniteMonoid& m, const std::set<Element>& heads);

enum class Task { Closure, Membership };
const char* to_string(Task t);
Task parse_task(const std::string& s);

struct Example {
    Word tokens;
    int label = 0;
    Task task = Task::Closure;
    nlohmann::json meta = nlohmann::json::object();
};

struct GenParams {
    Task task = Task::Closure;
    std::set<Element> accept;  // closure: F; membership: heads of accepted pairs. Empty means {identity}.
    std::size_t r = 2;
    std::size_t min_len = 1;   // closure: string length range; membership: |u| and |v| range
    std::size_t max_len = 8;
    double balance = 0.5;      // target fraction of positive labels
    double tolerance = 0.1;
    std::size_t retry_budget = 200000;  // draws per example before giving up
};

// Deterministic in (params, seed); example i draws from its own stream seeded by seed + i.
// Membership tokens are u, a separator (id = letter count), then v.
std::vector<Example> gen_dataset(const Morphism& h, const GenParams& params, std::size_t count, std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t x);

nlohmann::json example_to_json(const Example& e);
Example example_from_json(const nlohmann::json& j);
void write_jsonl(const std::string& path, const std::vector<Example>& data);
std::vector<Example> read_jsonl(const std::string& path);

// A builtin name or a path to a {size, table, identity} JSON file.
Morphism load_morphism(const std::string& name_or_path);

}  // namespace talab
