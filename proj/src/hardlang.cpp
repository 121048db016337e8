#include "talab/hardlang.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "talab/error.hpp"

namespace talab {

using nlohmann::json;

FiniteMonoid FiniteMonoid::make(const std::vector<std::vector<Element>>& table, Element identity, std::string name) {
    const std::size_t n = table.size();
    require(n >= 1 && n <= kMaxMonoidSize, ErrorKind::BadTable,
            "monoid size must be in [1, " + std::to_string(kMaxMonoidSize) + "], got " + std::to_string(n));
    require(identity < n, ErrorKind::BadTable, "identity index out of range");
    FiniteMonoid m;
    m.n_ = n;
    m.identity_ = identity;
    m.name_ = std::move(name);
    m.table_.reserve(n * n);
    for (const auto& row : table) {
        require(row.size() == n, ErrorKind::BadTable, "composition table is not square");
        for (Element e : row) {
            require(e < n, ErrorKind::BadTable, "table entry " + std::to_string(e) + " out of range");
            m.table_.push_back(e);
        }
    }
    for (Element a = 0; a < n; ++a)
        require(m.op(identity, a) == a && m.op(a, identity) == a, ErrorKind::BadTable,
                "element " + std::to_string(identity) + " is not a two-sided identity");
    for (Element a = 0; a < n; ++a)
        for (Element b = 0; b < n; ++b) {
            const Element ab = m.op(a, b);
            for (Element c = 0; c < n; ++c)
                if (m.op(ab, c) != m.op(a, m.op(b, c)))
                    fail(ErrorKind::BadTable, "associativity fails at (" + std::to_string(a) + ", " +
                                                  std::to_string(b) + ", " + std::to_string(c) + ")");
        }
    return m;
}

std::vector<std::vector<Element>> FiniteMonoid::table() const {
    std::vector<std::vector<Element>> out(n_);
    for (std::size_t a = 0; a < n_; ++a) out[a].assign(table_.begin() + a * n_, table_.begin() + (a + 1) * n_);
    return out;
}

json FiniteMonoid::to_json() const {
    return json{{"name", name_}, {"size", n_}, {"table", table()}, {"identity", identity_}};
}

FiniteMonoid FiniteMonoid::from_json(const json& j) {
    try {
        auto table = j.at("table").get<std::vector<std::vector<Element>>>();
        auto size = j.at("size").get<std::size_t>();
        require(size == table.size(), ErrorKind::BadTable, "size does not match the table");
        return make(table, j.at("identity").get<Element>(), j.value("name", std::string("custom")));
    } catch (const json::exception& e) {
        fail(ErrorKind::DataFormatError, std::string("monoid JSON: ") + e.what());
    }
}

FiniteMonoid cyclic_group(std::size_t k) {
    require(k >= 1 && k <= kMaxMonoidSize, ErrorKind::InvalidArgument, "cyclic group order out of range");
    std::vector<std::vector<Element>> t(k, std::vector<Element>(k));
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) t[a][b] = static_cast<Element>((a + b) % k);
    return FiniteMonoid::make(t, 0, "z" + std::to_string(k));
}

namespace {

std::vector<std::vector<Element>> all_permutations(std::size_t k) {
    std::vector<Element> p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<Element>(i);
    std::vector<std::vector<Element>> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

}  // namespace

std::vector<Element> permutation_of(std::size_t k, Element e) {
    require(k >= 1 && k <= 5, ErrorKind::InvalidArgument, "symmetric groups up to S5 only");
    auto perms = all_permutations(k);
    require(e < perms.size(), ErrorKind::InvalidArgument, "element out of range");
    return perms[e];
}

Element element_of(const std::vector<Element>& perm) {
    const std::size_t k = perm.size();
    require(k >= 1 && k <= 5, ErrorKind::InvalidArgument, "symmetric groups up to S5 only");
    auto perms = all_permutations(k);
    auto it = std::lower_bound(perms.begin(), perms.end(), perm);
    require(it != perms.end() && *it == perm, ErrorKind::InvalidArgument, "not a permutation");
    return static_cast<Element>(it - perms.begin());
}

FiniteMonoid symmetric_group(std::size_t k) {
    require(k >= 1 && k <= 5, ErrorKind::InvalidArgument, "symmetric groups up to S5 only");
    auto perms = all_permutations(k);
    std::map<std::vector<Element>, Element> index;
    for (std::size_t i = 0; i < perms.size(); ++i) index[perms[i]] = static_cast<Element>(i);
    const std::size_t n = perms.size();
    std::vector<std::vector<Element>> t(n, std::vector<Element>(n));
    std::vector<Element> fg(k);
    for (std::size_t f = 0; f < n; ++f)
        for (std::size_t g = 0; g < n; ++g) {
            for (std::size_t x = 0; x < k; ++x) fg[x] = perms[f][perms[g][x]];
            t[f][g] = index.at(fg);
        }
    return FiniteMonoid::make(t, 0, "s" + std::to_string(k));
}

Element Morphism::image(Letter a) const {
    require(a < images.size(), ErrorKind::UnknownSymbol,
            "letter id " + std::to_string(a) + " outside an alphabet of " + std::to_string(images.size()));
    return images[a];
}

Word Morphism::parse(const std::string& s) const {
    Word w;
    w.reserve(s.size());
    for (char ch : s) {
        auto it = std::find(names.begin(), names.end(), std::string(1, ch));
        require(it != names.end(), ErrorKind::UnknownSymbol, std::string("unknown letter '") + ch + "'");
        w.push_back(static_cast<Letter>(it - names.begin()));
    }
    return w;
}

std::string Morphism::render(const Word& w) const {
    std::string out;
    for (Letter a : w) {
        require(a < names.size(), ErrorKind::UnknownSymbol, "letter id " + std::to_string(a) + " has no name");
        out += names[a];
    }
    return out;
}

Morphism make_morphism(FiniteMonoid target, std::vector<Element> images, std::vector<std::string> names) {
    require(!images.empty(), ErrorKind::InvalidArgument, "a morphism needs at least one letter");
    for (Element e : images)
        require(e < target.size(), ErrorKind::InvalidArgument, "letter image outside the monoid");
    if (names.empty()) {
        for (std::size_t i = 0; i < images.size(); ++i)
            names.push_back(images.size() <= 26 ? std::string(1, static_cast<char>('a' + i)) : "x" + std::to_string(i));
    }
    require(names.size() == images.size(), ErrorKind::InvalidArgument, "one name per letter required");
    return Morphism{std::move(target), std::move(images), std::move(names)};
}

Morphism element_morphism(FiniteMonoid target) {
    std::vector<Element> images(target.size());
    for (std::size_t i = 0; i < images.size(); ++i) images[i] = static_cast<Element>(i);
    return make_morphism(std::move(target), std::move(images));
}

Morphism builtin_morphism(const std::string& name) {
    if (name == "z2") return make_morphism(cyclic_group(2), {1, 0});
    if (name == "s3") return make_morphism(symmetric_group(3), {element_of({1, 0, 2}), element_of({1, 2, 0})});
    if (name == "s5")
        return make_morphism(symmetric_group(5), {element_of({1, 0, 2, 3, 4}), element_of({1, 2, 3, 4, 0})});
    fail(ErrorKind::InvalidArgument, "unknown builtin monoid '" + name + "'");
}

std::vector<std::string> builtin_names() { return {"z2", "s3", "s5"}; }

Element monoid_eval(const Morphism& h, const Word& w, std::size_t begin, std::size_t end) {
    Element acc = h.target.identity();
    for (std::size_t i = begin; i < end; ++i) acc = h.target.op(acc, h.image(w[i]));
    return acc;
}

Element monoid_eval(const Morphism& h, const Word& w) { return monoid_eval(h, w, 0, w.size()); }

namespace {

void check_closure(const ClosureInstance& inst, std::size_t max_len) {
    require(inst.r >= 1, ErrorKind::InvalidArgument, "chunk bound r must be at least 1");
    require(inst.s.size() <= max_len, ErrorKind::InvalidArgument,
            "input length " + std::to_string(inst.s.size()) + " exceeds " + std::to_string(max_len));
    for (Letter a : inst.s) (void)inst.h.image(a);
    for (Element e : inst.accept)
        require(e < inst.h.target.size(), ErrorKind::InvalidArgument, "accepted element outside the monoid");
}

bool brute(const ClosureInstance& inst, std::size_t pos) {
    if (pos == inst.s.size()) return true;
    for (std::size_t len = 1; len <= inst.r && pos + len <= inst.s.size(); ++len)
        if (inst.accept.count(monoid_eval(inst.h, inst.s, pos, pos + len)) && brute(inst, pos + len)) return true;
    return false;
}

}  // namespace

bool closure_decide(const ClosureInstance& inst) {
    check_closure(inst, kMaxClosureLength);
    const auto& m = inst.h.target;
    std::vector<char> in_f(m.size(), 0);
    for (Element e : inst.accept) in_f[e] = 1;
    const std::size_t n = inst.s.size();
    std::vector<char> dp(n + 1, 0);
    dp[0] = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        // Valuation of s[i-len, i), extended leftwards one letter at a time.
        Element val = m.identity();
        for (std::size_t len = 1; len <= std::min(inst.r, i); ++len) {
            val = m.op(inst.h.image(inst.s[i - len]), val);
            if (dp[i - len] && in_f[val]) {
                dp[i] = 1;
                break;
            }
        }
    }
    return dp[n];
}

bool closure_brute(const ClosureInstance& inst) {
    check_closure(inst, kMaxBruteLength);
    return brute(inst, 0);
}

std::pair<std::size_t, Element> idempotent_power(const FiniteMonoid& m, Element t) {
    require(t < m.size(), ErrorKind::InvalidArgument, "element outside the monoid");
    Element p = t;
    for (std::size_t k = 1; k <= m.size(); ++k) {
        if (m.is_idempotent(p)) return {k, p};
        p = m.op(p, t);
    }
    fail(ErrorKind::InvalidArgument, "no idempotent power found; table is not a finite monoid");
}

std::set<LinkedPair> linked_pairs(const Morphism& h, const Word& u, const Word& v) {
    require(!u.empty() && !v.empty(), ErrorKind::InvalidArgument, "u and v must be nonempty");
    const auto& m = h.target;
    const Element s0 = monoid_eval(h, u);
    const Element t = monoid_eval(h, v);
    const std::size_t n = m.size();

    std::vector<Element> heads;
    Element s = s0;
    for (std::size_t a = 0; a <= n; ++a) {
        heads.push_back(s);
        s = m.op(s, t);
    }
    std::vector<Element> idempotents;
    Element e = t;
    for (std::size_t b = 1; b <= n; ++b) {
        if (m.is_idempotent(e)) idempotents.push_back(e);
        e = m.op(e, t);
    }
    std::set<LinkedPair> out;
    for (Element hd : heads)
        for (Element id : idempotents)
            if (m.op(hd, id) == hd) out.emplace(hd, id);
    return out;
}

std::set<LinkedPair> omega_pairs(const Morphism& h, const Word& u, const Word& v) {
    require(!u.empty() && !v.empty(), ErrorKind::InvalidArgument, "u and v must be nonempty");
    std::set<LinkedPair> out;
    Word prefix = u;
    for (std::size_t j = 0; j < v.size(); ++j) {
        Word rotated(v.begin() + static_cast<std::ptrdiff_t>(j), v.end());
        rotated.insert(rotated.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(j));
        auto part = linked_pairs(h, prefix, rotated);
        out.insert(part.begin(), part.end());
        prefix.push_back(v[j]);
    }
    return out;
}

bool membership_decide(const MembershipInstance& inst) {
    const auto& m = inst.h.target;
    for (const auto& [s, e] : inst.accept) {
        require(s < m.size() && e < m.size(), ErrorKind::MalformedPairSet, "accepted pair outside the monoid");
        require(m.is_idempotent(e), ErrorKind::MalformedPairSet,
                "second component " + std::to_string(e) + " is not idempotent");
    }
    if (inst.accept.empty()) return false;
    for (const auto& p : omega_pairs(inst.h, inst.u, inst.v))
        if (inst.accept.count(p)) return true;
    return false;
}

std::set<LinkedPair> pairs_with_heads(const FiniteMonoid& m, const std::set<Element>& heads) {
    std::set<LinkedPair> out;
    for (Element s : heads) {
        require(s < m.size(), ErrorKind::InvalidArgument, "element outside the monoid");
        for (Element e = 0; e < m.size(); ++e)
            if (m.is_idempotent(e) && m.op(s, e) == s) out.emplace(s, e);
    }
    return out;
}

const char* to_string(Task t) { return t == Task::Closure ? "closure" : "membership"; }

Task parse_task(const std::string& s) {
    if (s == "closure") return Task::Closure;
    if (s == "membership") return Task::Membership;
    fail(ErrorKind::InvalidArgument, "unknown task '" + s + "' (closure|membership)");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

// Uniform in [lo, hi], independent of the standard library's distributions.
std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    const unsigned __int128 span = static_cast<unsigned __int128>(hi - lo) + 1;
    return lo + static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * span) >> 64);
}

Word draw_word(std::mt19937_64& rng, std::size_t letters, std::size_t lo, std::size_t hi) {
    Word w(draw(rng, lo, hi));
    for (auto& a : w) a = static_cast<Letter>(draw(rng, 0, letters - 1));
    return w;
}

json element_list(const std::set<Element>& s) { return json(std::vector<Element>(s.begin(), s.end())); }

}  // namespace

std::vector<Example> gen_dataset(const Morphism& h, const GenParams& params, std::size_t count, std::uint64_t seed) {
    require(params.balance >= 0.0 && params.balance <= 1.0, ErrorKind::InvalidArgument, "balance must be in [0, 1]");
    require(params.min_len <= params.max_len, ErrorKind::InvalidArgument, "min length exceeds max length");
    require(params.r >= 1, ErrorKind::InvalidArgument, "chunk bound r must be at least 1");
    const auto& m = h.target;
    std::set<Element> accept = params.accept.empty() ? std::set<Element>{m.identity()} : params.accept;
    for (Element e : accept) require(e < m.size(), ErrorKind::InvalidArgument, "accepted element outside the monoid");

    const bool closure = params.task == Task::Closure;
    const std::size_t lo = closure ? params.min_len : std::max<std::size_t>(1, params.min_len);
    require(params.max_len >= 1, ErrorKind::InvalidArgument, "max length must be at least 1");
    std::set<LinkedPair> pairs;
    if (!closure) pairs = pairs_with_heads(m, accept);

    std::vector<Example> out;
    out.reserve(count);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < count; ++i) {
        // Spread positives evenly: index i is positive when floor((i+1)b) steps past floor(ib).
        const int want = static_cast<int>(std::floor((i + 1) * params.balance) - std::floor(i * params.balance));
        std::mt19937_64 rng(splitmix64(seed + i));
        bool done = false;
        for (std::size_t attempt = 0; attempt < params.retry_budget && !done; ++attempt) {
            Example ex;
            ex.task = params.task;
            if (closure) {
                ClosureInstance inst{h, accept, params.r, draw_word(rng, h.letters(), lo, params.max_len)};
                ex.label = closure_decide(inst) ? 1 : 0;
                if (ex.label != want) continue;
                ex.tokens = inst.s;
                ex.meta = {{"monoid", m.name()}, {"r", params.r},          {"accept", element_list(accept)},
                           {"word", h.render(inst.s)}, {"vocab", h.letters()}};
            } else {
                MembershipInstance inst{h, pairs, draw_word(rng, h.letters(), lo, params.max_len),
                                        draw_word(rng, h.letters(), lo, params.max_len)};
                ex.label = membership_decide(inst) ? 1 : 0;
                if (ex.label != want) continue;
                ex.tokens = inst.u;
                ex.tokens.push_back(static_cast<Letter>(h.letters()));
                ex.tokens.insert(ex.tokens.end(), inst.v.begin(), inst.v.end());
                ex.meta = {{"monoid", m.name()},        {"heads", element_list(accept)}, {"u", h.render(inst.u)},
                           {"v", h.render(inst.v)}, {"vocab", h.letters() + 1}};
            }
            positives += static_cast<std::size_t>(ex.label);
            out.push_back(std::move(ex));
            done = true;
        }
        if (!done)
            fail(ErrorKind::BalanceUnreachable, "no " + std::string(want ? "positive" : "negative") +
                                                    " instance found for example " + std::to_string(i) + " within " +
                                                    std::to_string(params.retry_budget) + " draws");
    }
    if (count > 0 && static_cast<double>(count) * params.tolerance >= 1.0) {
        const double frac = static_cast<double>(positives) / static_cast<double>(count);
        require(std::fabs(frac - params.balance) <= params.tolerance, ErrorKind::BalanceUnreachable,
                "positive fraction " + std::to_string(frac) + " outside tolerance");
    }
    return out;
}

json example_to_json(const Example& e) {
    return json{{"tokens", e.tokens}, {"label", e.label}, {"task", to_string(e.task)}, {"meta", e.meta}};
}

Example example_from_json(const json& j) {
    Example e;
    try {
        e.tokens = j.at("tokens").get<Word>();
        e.label = j.at("label").get<int>();
        e.task = parse_task(j.at("task").get<std::string>());
        if (j.contains("meta")) e.meta = j.at("meta");
    } catch (const json::exception& ex) {
        fail(ErrorKind::DataFormatError, std::string("dataset record: ") + ex.what());
    } catch (const Error& ex) {
        fail(ErrorKind::DataFormatError, std::string("dataset record: ") + ex.what());
    }
    require(e.label == 0 || e.label == 1, ErrorKind::DataFormatError, "label must be 0 or 1");
    return e;
}

void write_jsonl(const std::string& path, const std::vector<Example>& data) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::DataFormatError, "cannot write " + path);
    for (const auto& e : data) os << example_to_json(e).dump() << "\n";
    require(static_cast<bool>(os), ErrorKind::DataFormatError, "write failed for " + path);
}

std::vector<Example> read_jsonl(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::DataFormatError, "cannot open " + path);
    std::vector<Example> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        require(!j.is_discarded() && j.is_object(), ErrorKind::DataFormatError,
                path + ":" + std::to_string(lineno) + ": not a JSON object");
        try {
            out.push_back(example_from_json(j));
        } catch (const Error& e) {
            fail(ErrorKind::DataFormatError, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

Morphism load_morphism(const std::string& name_or_path) {
    for (const auto& n : builtin_names())
        if (n == name_or_path) return builtin_morphism(n);
    std::ifstream is(name_or_path);
    require(static_cast<bool>(is), ErrorKind::InvalidArgument,
            "'" + name_or_path + "' is neither a builtin monoid nor a readable file");
    json j = json::parse(is, nullptr, false);
    require(!j.is_discarded(), ErrorKind::DataFormatError, name_or_path + ": invalid JSON");
    return element_morphism(FiniteMonoid::from_json(j));
}

}  // namespace talab
