#pragma once
// Grammar induction over discrete action sequences. One engine drives three
// calculators: classic online Sequitur (digram uniqueness + rule utility),
// k-Sequitur (a rule is created only once a digram has k non-overlapping
// occurrences) and an MDL-filtered Sequitur (a rule is created only if the
// total encoding cost strictly drops).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace actiongram {

enum class SymbolKind : std::uint8_t { terminal, nonterminal };

struct Symbol {
    int id = 0;
    SymbolKind kind = SymbolKind::terminal;

    friend bool operator==(const Symbol&, const Symbol&) = default;
    friend auto operator<=>(const Symbol&, const Symbol&) = default;
};

inline Symbol terminal(int id) { return {id, SymbolKind::terminal}; }
inline Symbol nonterminal(int id) { return {id, SymbolKind::nonterminal}; }

struct Rule {
    Symbol head;               // always a nonterminal
    std::vector<Symbol> body;  // length >= 2
};

// A context-free grammar whose start sequence expands to exactly the input
// it was inferred from. Nonterminal ids are dense, assigned in order of
// first appearance, and start above the largest terminal id seen.
struct Grammar {
    std::vector<Symbol> start;
    std::vector<Rule> rules;  // ascending head id

    const Rule* find(int head) const {
        for (const Rule& r : rules)
            if (r.head.id == head) return &r;
        return nullptr;
    }
};

// A flattened rule: the unit appended to an agent's action set.
struct MacroAction {
    std::vector<int> primitives;  // terminal ids, length >= 2
    int source = -1;              // nonterminal it was flattened from
};

namespace detail {

class GrammarBuilder {
public:
    enum class Mode { plain, k_rep, mdl };

    GrammarBuilder(Mode mode, int k) : mode_(mode), k_(k) {
        start_guard_ = make_guard(kStart);
    }

    void append(int term) {
        input_.push_back(term);
        terminals_.insert(term);
        Node* n = new_node(terminal(term), kStart);
        Node* last = start_guard_->prev;
        link(last, n);
        link(n, start_guard_);
        if (!last->guard) try_register(last);
        drain();
    }

    Grammar finish() {
        if (mode_ == Mode::k_rep) inline_underused(k_);
        if (mode_ == Mode::mdl && current_cost() > raw_cost()) {
            // the online filter overshot; the rule-free encoding is cheaper
            Grammar g;
            for (int t : input_) g.start.push_back(terminal(t));
            return g;
        }
        return snapshot();
    }

private:
    static constexpr int kStart = -1;

    struct Node {
        Symbol sym;
        Node* prev = nullptr;
        Node* next = nullptr;
        int owner = kStart;  // rule id whose list holds this node
        bool guard = false;
        bool registered = false;
        bool dead = false;
    };

    struct RuleCtx {
        Node* guard = nullptr;
        int refs = 0;
        int len = 0;
    };

    using Key = std::uint64_t;

    static std::uint32_t enc(Symbol s) {
        return (static_cast<std::uint32_t>(s.id) << 1) |
               (s.kind == SymbolKind::nonterminal ? 1u : 0u);
    }
    static Key key_of(const Node* n) {
        return (static_cast<Key>(enc(n->sym)) << 32) | enc(n->next->sym);
    }
    static Key key_of(Symbol a, Symbol b) {
        return (static_cast<Key>(enc(a)) << 32) | enc(b);
    }
    static Symbol key_first(Key k) {
        auto e = static_cast<std::uint32_t>(k >> 32);
        return {static_cast<int>(e >> 1),
                (e & 1u) ? SymbolKind::nonterminal : SymbolKind::terminal};
    }
    static Symbol key_second(Key k) {
        auto e = static_cast<std::uint32_t>(k & 0xffffffffu);
        return {static_cast<int>(e >> 1),
                (e & 1u) ? SymbolKind::nonterminal : SymbolKind::terminal};
    }

    static void link(Node* a, Node* b) {
        a->next = b;
        b->prev = a;
    }

    Node* make_guard(int owner) {
        arena_.emplace_back();
        Node* g = &arena_.back();
        g->guard = true;
        g->owner = owner;
        g->prev = g->next = g;
        return g;
    }

    Node* new_node(Symbol s, int owner) {
        arena_.emplace_back();
        Node* n = &arena_.back();
        n->sym = s;
        n->owner = owner;
        ++n_symbols_;
        if (s.kind == SymbolKind::nonterminal) ++rules_.at(s.id).refs;
        return n;
    }

    // Unregisters, unlinks and retires a node. Callers relink afterwards.
    void kill_node(Node* n) {
        unregister(n);
        --n_symbols_;
        if (n->sym.kind == SymbolKind::nonterminal) --rules_.at(n->sym.id).refs;
        n->dead = true;
    }

    bool forms_digram(const Node* n) const { return !n->guard && !n->next->guard; }

    void unregister(Node* n) {
        if (!n->registered) return;
        auto& occ = occurrences_[key_of(n)];
        occ.erase(std::find(occ.begin(), occ.end(), n));
        n->registered = false;
    }

    // Records the digram starting at n. The first pair of an overlapping run
    // wins: a same-key registered predecessor suppresses n, and a same-key
    // registered successor is displaced by n.
    void try_register(Node* n) {
        if (n->dead || n->guard || n->registered || !forms_digram(n)) return;
        Key k = key_of(n);
        Node* p = n->prev;
        if (!p->guard && p->registered && key_of(p) == k) return;
        Node* m = n->next;
        if (m->registered && forms_digram(m) && key_of(m) == k) unregister(m);
        occurrences_[k].push_back(n);
        n->registered = true;
        pending_.push_back(k);
    }

    std::vector<Node*> live_occurrences(Key k) {
        std::vector<Node*> out;
        auto it = occurrences_.find(k);
        if (it == occurrences_.end()) return out;
        for (Node* n : it->second)
            if (!n->dead && n->registered) out.push_back(n);
        return out;
    }

    void drain() {
        while (!pending_.empty()) {
            Key k = pending_.front();
            pending_.pop_front();
            process_key(k);
            enforce_utility();
        }
    }

    double cost(double symbols, double rule_count, double distinct) const {
        return (symbols + rule_count) * std::log2(std::max(2.0, distinct));
    }

    double current_cost() const {
        return cost(static_cast<double>(n_symbols_), static_cast<double>(rules_.size()),
                    static_cast<double>(terminals_.size() + rules_.size()));
    }

    double raw_cost() const {
        return cost(static_cast<double>(input_.size()), 0.0,
                    static_cast<double>(terminals_.size()));
    }

    bool mdl_accepts(std::size_t occurrence_count) const {
        auto c = static_cast<double>(occurrence_count);
        double n = static_cast<double>(n_symbols_);
        double r = static_cast<double>(rules_.size());
        double d = static_cast<double>(terminals_.size() + rules_.size());
        return cost(n - c + 2.0, r + 1.0, d + 1.0) < cost(n, r, d);
    }

    void process_key(Key k) {
        auto live = live_occurrences(k);
        if (live.empty()) return;

        auto reuse = body_index_.find(k);
        if (reuse != body_index_.end()) {
            int rid = reuse->second;
            for (Node* n : live) {
                if (n->dead || !n->registered || n->owner == rid) continue;
                substitute(n, rid);
            }
            return;
        }

        std::size_t threshold = mode_ == Mode::k_rep ? static_cast<std::size_t>(k_) : 2;
        if (live.size() < threshold) return;
        if (mode_ == Mode::mdl && !mdl_accepts(live.size())) return;

        int rid = next_rule_id_++;
        RuleCtx ctx;
        ctx.guard = make_guard(rid);
        ctx.len = 2;
        rules_.emplace(rid, ctx);
        Node* a = new_node(key_first(k), rid);
        Node* b = new_node(key_second(k), rid);
        Node* g = rules_.at(rid).guard;
        link(g, a);
        link(a, b);
        link(b, g);
        body_index_[k] = rid;
        try_register(a);

        for (Node* n : live) {
            if (n->dead || !n->registered || n->owner == rid) continue;
            substitute(n, rid);
        }
    }

    // Replaces the digram (n, n->next) with a reference to rule rid.
    void substitute(Node* n, int rid) {
        Node* m = n->next;
        Node* p = n->prev;
        Node* q = m->next;
        int owner = n->owner;
        if (!p->guard) unregister(p);
        kill_node(n);
        kill_node(m);
        Node* nt = new_node(nonterminal(rid), owner);
        link(p, nt);
        link(nt, q);
        if (!p->guard) try_register(p);
        try_register(nt);
        if (!q->guard) try_register(q);
        body_shrunk(owner);
    }

    void body_shrunk(int owner) {
        if (owner == kStart) return;
        RuleCtx& ctx = rules_.at(owner);
        --ctx.len;
        if (ctx.len == 2) index_body(owner);
        if (ctx.len == 1) dissolve(owner);
    }

    // Registers a length-2 body as reusable; identical bodies merge.
    void index_body(int rid) {
        RuleCtx& ctx = rules_.at(rid);
        Node* a = ctx.guard->next;
        Key k = key_of(a->sym, a->next->sym);
        auto [it, inserted] = body_index_.emplace(k, rid);
        if (!inserted && it->second != rid) unify(it->second, rid);
    }

    void drop_body_index(int rid) {
        for (auto it = body_index_.begin(); it != body_index_.end(); ++it) {
            if (it->second == rid) {
                body_index_.erase(it);
                return;
            }
        }
    }

    std::vector<Node*> reference_sites(int rid) {
        std::vector<Node*> sites;
        auto scan = [&](Node* guard) {
            for (Node* n = guard->next; n != guard; n = n->next)
                if (n->sym == nonterminal(rid)) sites.push_back(n);
        };
        scan(start_guard_);
        for (auto& [id, ctx] : rules_)
            if (id != rid) scan(ctx.guard);
        return sites;
    }

    // Replaces every reference to rid with the given symbol, then deletes rid.
    // Sites are re-scanned one at a time: swapping a symbol inside another
    // two-symbol body can cascade into a unify that rewrites pending sites.
    void replace_refs_and_delete(int rid, Symbol with) {
        while (true) {
            auto sites = reference_sites(rid);
            if (sites.empty()) break;
            Node* site = sites.front();
            Node* p = site->prev;
            if (!p->guard) unregister(p);
            unregister(site);
            --rules_.at(rid).refs;
            if (with.kind == SymbolKind::nonterminal) ++rules_.at(with.id).refs;
            site->sym = with;
            if (!p->guard) try_register(p);
            try_register(site);
            if (site->owner != kStart && site->owner != rid &&
                rules_.at(site->owner).len == 2) {
                // the swap changed a two-symbol body's digram
                drop_body_index(site->owner);
                index_body(site->owner);
            }
        }
        delete_rule(rid);
    }

    // Two rules acquired the same two-symbol body; the incumbent keeps it.
    void unify(int keep, int drop) { replace_refs_and_delete(drop, nonterminal(keep)); }

    // A body shrank to a single symbol; the rule is redundant.
    void dissolve(int rid) {
        Node* only = rules_.at(rid).guard->next;
        replace_refs_and_delete(rid, only->sym);
    }

    void delete_rule(int rid) {
        drop_body_index(rid);
        Node* g = rules_.at(rid).guard;
        for (Node* n = g->next; n != g;) {
            Node* next = n->next;
            kill_node(n);
            n = next;
        }
        rules_.erase(rid);
    }

    // Splices a copy of the rule body over every reference, then deletes it.
    void inline_rule(int rid) {
        std::vector<Symbol> body;
        Node* g = rules_.at(rid).guard;
        for (Node* n = g->next; n != g; n = n->next) body.push_back(n->sym);

        for (Node* site : reference_sites(rid)) {
            Node* p = site->prev;
            Node* q = site->next;
            int owner = site->owner;
            if (!p->guard) unregister(p);
            kill_node(site);
            Node* cur = p;
            for (Symbol s : body) {
                Node* n = new_node(s, owner);
                link(cur, n);
                cur = n;
            }
            link(cur, q);
            for (Node* n = p->guard ? p->next : p; n != q; n = n->next) try_register(n);
            if (!q->guard) try_register(q);
            if (owner != kStart) {
                RuleCtx& ctx = rules_.at(owner);
                ctx.len += static_cast<int>(body.size()) - 1;
                if (ctx.len > 2) drop_body_index(owner);
            }
        }
        delete_rule(rid);
    }

    // Classic rule utility: a rule referenced once is expanded in place.
    void enforce_utility() {
        if (mode_ == Mode::k_rep) return;  // handled by a final pass instead
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& [rid, ctx] : rules_) {
                if (ctx.refs == 1) {
                    inline_rule(rid);
                    changed = true;
                    break;
                }
            }
        }
    }

    void inline_underused(int min_refs) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto& [rid, ctx] : rules_) {
                if (ctx.refs < min_refs) {
                    inline_rule(rid);
                    changed = true;
                    break;
                }
            }
        }
    }

    // Renumbers nonterminals in first-appearance order starting just above
    // the largest terminal id, and emits the value-type grammar.
    Grammar snapshot() const {
        int base = terminals_.empty() ? 0 : *terminals_.rbegin() + 1;
        std::map<int, int> renumber;
        std::vector<int> order;
        auto visit = [&](Symbol s) {
            if (s.kind == SymbolKind::nonterminal && !renumber.count(s.id)) {
                renumber[s.id] = base + static_cast<int>(order.size());
                order.push_back(s.id);
            }
        };

        Grammar g;
        for (Node* n = start_guard_->next; n != start_guard_; n = n->next) visit(n->sym);
        for (std::size_t i = 0; i < order.size(); ++i) {
            Node* guard = rules_.at(order[i]).guard;
            for (Node* n = guard->next; n != guard; n = n->next) visit(n->sym);
        }

        auto translate = [&](Symbol s) {
            return s.kind == SymbolKind::nonterminal ? nonterminal(renumber.at(s.id)) : s;
        };
        for (Node* n = start_guard_->next; n != start_guard_; n = n->next)
            g.start.push_back(translate(n->sym));
        for (int old_id : order) {
            Rule r;
            r.head = nonterminal(renumber.at(old_id));
            Node* guard = rules_.at(old_id).guard;
            for (Node* n = guard->next; n != guard; n = n->next)
                r.body.push_back(translate(n->sym));
            g.rules.push_back(std::move(r));
        }
        return g;
    }

    Mode mode_;
    int k_;
    std::deque<Node> arena_;
    Node* start_guard_ = nullptr;
    std::map<int, RuleCtx> rules_;
    int next_rule_id_ = 0;
    std::unordered_map<Key, std::vector<Node*>> occurrences_;
    std::unordered_map<Key, int> body_index_;
    std::deque<Key> pending_;
    long long n_symbols_ = 0;
    std::set<int> terminals_;
    std::vector<int> input_;
};

inline Grammar infer(std::span<const int> seq, GrammarBuilder::Mode mode, int k) {
    if (seq.empty()) throw std::invalid_argument("empty input");
    GrammarBuilder b(mode, k);
    for (int t : seq) {
        if (t < 0) throw std::invalid_argument("negative symbol id");
        b.append(t);
    }
    return b.finish();
}

}  // namespace detail

inline Grammar sequitur_infer(std::span<const int> seq) {
    return detail::infer(seq, detail::GrammarBuilder::Mode::plain, 2);
}

inline Grammar k_sequitur_infer(std::span<const int> seq, int k) {
    if (k < 2) throw std::invalid_argument("invalid k");
    return detail::infer(seq, detail::GrammarBuilder::Mode::k_rep, k);
}

inline Grammar mdl_filter(std::span<const int> seq) {
    return detail::infer(seq, detail::GrammarBuilder::Mode::mdl, 2);
}

// Encoding cost in bits: (symbol occurrences + rule count) * log2 of the
// distinct-symbol count, floored at an alphabet of two.
inline double encoding_cost(const Grammar& g) {
    std::set<Symbol> distinct;
    std::size_t occurrences = g.start.size();
    for (Symbol s : g.start) distinct.insert(s);
    for (const Rule& r : g.rules) {
        distinct.insert(r.head);
        occurrences += r.body.size();
        for (Symbol s : r.body) distinct.insert(s);
    }
    double units = static_cast<double>(occurrences + g.rules.size());
    return units * std::log2(std::max<double>(2.0, static_cast<double>(distinct.size())));
}

inline double raw_encoding_cost(std::span<const int> seq) {
    Grammar g;
    for (int t : seq) g.start.push_back(terminal(t));
    return encoding_cost(g);
}

inline std::vector<int> flatten(const Grammar& g, int head) {
    const Rule* r = g.find(head);
    if (!r) throw std::out_of_range("unknown head");
    std::vector<int> out;
    for (Symbol s : r->body) {
        if (s.kind == SymbolKind::terminal) {
            out.push_back(s.id);
        } else {
            auto sub = flatten(g, s.id);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    }
    return out;
}

// Full expansion of the start sequence; equals the original input.
inline std::vector<int> expand(const Grammar& g) {
    std::vector<int> out;
    for (Symbol s : g.start) {
        if (s.kind == SymbolKind::terminal) {
            out.push_back(s.id);
        } else {
            auto sub = flatten(g, s.id);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    }
    return out;
}

// One macro per nonterminal, deduplicated by primitive sequence, in head-id
// order. Callers drop macros already present in their action set.
inline std::vector<MacroAction> extract_macros(const Grammar& g) {
    std::vector<MacroAction> out;
    std::set<std::vector<int>> seen;
    for (const Rule& r : g.rules) {
        auto prims = flatten(g, r.head.id);
        if (prims.size() < 2) continue;
        if (!seen.insert(prims).second) continue;
        out.push_back({std::move(prims), r.head.id});
    }
    return out;
}

// Whitespace-separated integer ids; the debugging wire format.
inline std::vector<int> parse_symbol_sequence(std::istream& in) {
    std::vector<int> out;
    std::string tok;
    while (in >> tok) {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad symbol token: " + tok);
        }
        if (pos != tok.size()) throw std::invalid_argument("bad symbol token: " + tok);
        out.push_back(v);
    }
    return out;
}

inline void print_symbol(std::ostream& os, Symbol s) {
    if (s.kind == SymbolKind::nonterminal) os << 'R';
    os << s.id;
}

inline void print_grammar(std::ostream& os, const Grammar& g) {
    os << "start:";
    for (Symbol s : g.start) {
        os << ' ';
        print_symbol(os, s);
    }
    os << '\n';
    for (const Rule& r : g.rules) {
        os << 'R' << r.head.id << " ->";
        for (Symbol s : r.body) {
            os << ' ';
            print_symbol(os, s);
        }
        os << '\n';
    }
}

}  // namespace actiongram
