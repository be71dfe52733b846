#include "ni/synth.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ni/errors.hpp"

namespace ni {

namespace {

struct Theme {
  std::vector<std::string> quantities;
  std::vector<std::string> inputs;
  std::string unit;  // loop variable
};

const std::vector<Theme>& themes() {
  static const std::vector<Theme> t = {
      {{"celsius", "fahrenheit", "kelvin", "temperature", "heat_index"}, {"sensor", "thermometer", "weather"}, "reading"},
      {{"meters", "miles", "kilometers", "distance", "feet"}, {"route", "trip", "gps"}, "segment"},
      {{"price", "tax", "discount", "total_cost", "balance"}, {"invoice", "order", "cart"}, "amount"},
      {{"seconds", "minutes", "hours", "duration", "deadline"}, {"clock", "timer", "schedule"}, "interval"},
      {{"message", "title", "sentence", "summary", "keywords"}, {"document", "page", "article"}, "line"},
      {{"user_name", "email", "password", "user_id", "profile"}, {"account", "session", "form"}, "member"},
      {{"path", "filename", "content", "directory", "extension"}, {"archive", "folder", "disk"}, "entry"},
      {{"url", "response", "headers", "status_code", "payload"}, {"client", "server", "connection"}, "packet"},
      {{"width", "height", "area", "radius", "volume"}, {"shape", "canvas", "box"}, "side"},
      {{"mean", "variance", "median", "std_dev", "total_count"}, {"samples", "dataset", "table"}, "sample"},
      {{"red", "green", "blue", "brightness", "hue"}, {"pixel", "image", "palette"}, "channel"},
      {{"grams", "pounds", "kilograms", "mass", "weight"}, {"scale", "package", "parcel"}, "item"},
  };
  return t;
}

const std::vector<std::string> kProducers = {"compute_", "to_", "get_", "calculate_", "convert_to_"};
const std::vector<std::string> kSources = {"read_", "load_", "measure_", "fetch_"};
const std::vector<std::string> kSinks = {"print_", "save_", "log_", "send_", "check_"};
const std::vector<std::string> kNumbers = {"2", "10", "0.5", "1.8", "32", "100", "3"};
const std::vector<std::string> kArith = {"+", "-", "*", "/"};
const std::vector<std::string> kCompare = {">", "<", ">=", "=="};

// ---- program representation ----------------------------------------------

struct Expr {
  enum Kind { Name, Num, Call, Method, BinOp, Compare, List } kind = Name;
  std::string text;  // name, literal, callee, method or operator
  std::vector<Expr> args;  // Method: args[0] is the receiver
  int site = -1;           // Name occurrences
};

struct Stmt {
  enum Kind { Assign, Aug, ExprCall, If, While, For, Def, Return } kind = Assign;
  std::string target;  // Assign/Aug/For target, Def name
  std::string op;      // Aug operator
  Expr value;          // Assign/Aug/ExprCall/Return value, If/While condition, For iterable
  std::vector<Stmt> body;
  std::vector<Stmt> orelse;
  std::vector<std::string> params;
};

struct Program {
  std::vector<Stmt> stmts;
  int sites = 0;
};

// ---- rendering ----------------------------------------------------------------

class Renderer {
 public:
  explicit Renderer(int sites) : offsets(static_cast<std::size_t>(sites), -1) {}

  std::string out;
  std::vector<long> offsets;

  void block(const std::vector<Stmt>& stmts, int depth) {
    for (const Stmt& s : stmts) stmt(s, depth);
  }

  void stmt(const Stmt& s, int depth) {
    out += std::string(static_cast<std::size_t>(depth) * 4, ' ');
    switch (s.kind) {
      case Stmt::Assign:
        out += s.target + " = ";
        expr(s.value, false);
        out += "\n";
        break;
      case Stmt::Aug:
        out += s.target + " " + s.op + " ";
        expr(s.value, false);
        out += "\n";
        break;
      case Stmt::ExprCall:
        expr(s.value, false);
        out += "\n";
        break;
      case Stmt::Return:
        out += "return ";
        expr(s.value, false);
        out += "\n";
        break;
      case Stmt::If:
        out += "if ";
        expr(s.value, false);
        out += ":\n";
        block(s.body, depth + 1);
        if (!s.orelse.empty()) {
          out += std::string(static_cast<std::size_t>(depth) * 4, ' ') + "else:\n";
          block(s.orelse, depth + 1);
        }
        break;
      case Stmt::While:
        out += "while ";
        expr(s.value, false);
        out += ":\n";
        block(s.body, depth + 1);
        break;
      case Stmt::For:
        out += "for " + s.target + " in ";
        expr(s.value, false);
        out += ":\n";
        block(s.body, depth + 1);
        break;
      case Stmt::Def: {
        out += "def " + s.target + "(";
        for (std::size_t i = 0; i < s.params.size(); ++i) out += (i ? ", " : "") + s.params[i];
        out += "):\n";
        block(s.body, depth + 1);
        break;
      }
    }
  }

  void expr(const Expr& e, bool nested) {
    switch (e.kind) {
      case Expr::Name:
        if (e.site >= 0) offsets[static_cast<std::size_t>(e.site)] = static_cast<long>(out.size());
        out += e.text;
        break;
      case Expr::Num:
        out += e.text;
        break;
      case Expr::Call:
        out += e.text + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i) out += ", ";
          expr(e.args[i], false);
        }
        out += ")";
        break;
      case Expr::Method:
        expr(e.args[0], true);
        out += "." + e.text + "(";
        for (std::size_t i = 1; i < e.args.size(); ++i) {
          if (i > 1) out += ", ";
          expr(e.args[i], false);
        }
        out += ")";
        break;
      case Expr::BinOp:
      case Expr::Compare:
        if (nested) out += "(";
        expr(e.args[0], true);
        out += " " + e.text + " ";
        expr(e.args[1], true);
        if (nested) out += ")";
        break;
      case Expr::List:
        out += "[";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i) out += ", ";
          expr(e.args[i], false);
        }
        out += "]";
        break;
    }
  }
};

// ---- symbolic lowering ------------------------------------------------------------

struct SiteInfo {
  int site = -1;
  std::string name;
  int object = -1;
  bool was_bound = false;
  std::vector<std::pair<std::string, int>> visible;  // value bindings at the site
};

class Symbolic {
 public:
  explicit Symbolic(int misuse_site) : misuse_site_(misuse_site) { scopes_.emplace_back(); }

  int statements = 0;
  int objects = 0;
  int records = 0;
  std::vector<std::pair<int, int>> edges;
  std::set<std::string> bound;
  std::vector<SiteInfo> sites;
  int view = -1;
  int source_record = -1;
  int arg_index = -1;

  void block(const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) stmt(s);
  }

 private:
  struct Frame {
    std::map<std::string, int> table;
    bool function = false;
    int ret = -1;
  };

  int fresh() { return objects++; }

  int record(const std::vector<int>& args) {
    const int r = fresh();
    for (int a : args) edges.emplace_back(a, r);
    ++records;
    return r;
  }

  std::optional<int> find(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->table.find(name);
      if (f != it->table.end()) return f->second;
    }
    return std::nullopt;
  }

  void store(const std::string& name, int obj) {
    scopes_.back().table[name] = obj;
    bound.insert(name);
  }

  int lookup(const std::string& name, bool function) {
    if (auto f = find(name)) return *f;
    const int g = fresh();
    if (function) functions_.insert(g);
    store(name, g);
    return g;
  }

  std::vector<std::pair<std::string, int>> visible() const {
    std::map<std::string, int> seen;
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      for (const auto& [name, obj] : it->table) {
        if (!seen.count(name)) seen[name] = obj;
      }
    }
    std::vector<std::pair<std::string, int>> out;
    for (const auto& [name, obj] : seen) {
      if (!functions_.count(obj)) out.emplace_back(name, obj);
    }
    return out;
  }

  // Evaluates a call argument; returns the object and whether it is the misuse view.
  int argument(const Expr& e, bool& is_view) {
    is_view = false;
    if (e.kind == Expr::Name && e.site >= 0) {
      SiteInfo info;
      info.site = e.site;
      info.name = e.text;
      info.visible = visible();
      info.was_bound = find(e.text).has_value();
      const int obj = lookup(e.text, false);
      info.object = obj;
      sites.push_back(std::move(info));
      if (e.site == misuse_site_) {
        view = fresh();
        edges.emplace_back(obj, view);
        is_view = true;
        return view;
      }
      return obj;
    }
    return expr(e);
  }

  int call_with(std::vector<int> args, int view_position) {
    const int r = record(args);
    if (view_position >= 0 && source_record < 0) {
      source_record = records - 1;
      arg_index = view_position;
    }
    return r;
  }

  int expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Name: {
        const int obj = lookup(e.text, false);
        if (e.site >= 0 && e.site == misuse_site_) throw InternalFault("synthetic misuse outside a call argument");
        return obj;
      }
      case Expr::Num:
        return fresh();
      case Expr::Call: {
        if (compiling_.count(e.text)) {
          const int g = fresh();
          functions_.insert(g);
          store(e.text, g);
        } else {
          lookup(e.text, true);
        }
        std::vector<int> args;
        int view_position = -1;
        for (const Expr& a : e.args) {
          bool is_view = false;
          args.push_back(argument(a, is_view));
          if (is_view) view_position = static_cast<int>(args.size()) - 1;
        }
        return call_with(std::move(args), view_position);
      }
      case Expr::Method: {
        std::vector<int> args;
        args.push_back(expr(e.args[0]));
        functions_.insert(fresh());  // guessed method signature
        int view_position = -1;
        for (std::size_t i = 1; i < e.args.size(); ++i) {
          bool is_view = false;
          args.push_back(argument(e.args[i], is_view));
          if (is_view) view_position = static_cast<int>(args.size()) - 1;
        }
        return call_with(std::move(args), view_position);
      }
      case Expr::BinOp:
      case Expr::Compare: {
        const int l = expr(e.args[0]);
        const int r = expr(e.args[1]);
        return record({l, r});
      }
      case Expr::List: {
        std::vector<int> items;
        for (const Expr& a : e.args) items.push_back(expr(a));
        return record(items);
      }
    }
    return -1;
  }

  void stmt(const Stmt& s) {
    ++statements;
    switch (s.kind) {
      case Stmt::Assign:
        store(s.target, expr(s.value));
        return;
      case Stmt::Aug: {
        const int cur = lookup(s.target, false);
        const int val = expr(s.value);
        store(s.target, record({cur, val}));
        return;
      }
      case Stmt::ExprCall:
        expr(s.value);
        return;
      case Stmt::Return: {
        const int v = expr(s.value);
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
          if (it->function) {
            it->ret = v;
            return;
          }
        }
        scopes_.back().ret = v;
        return;
      }
      case Stmt::If: {
        const int c = expr(s.value);
        record({c});
        block(s.body);
        if (!s.orelse.empty()) {
          record({c});
          block(s.orelse);
        }
        return;
      }
      case Stmt::While: {
        const int c = expr(s.value);
        record({c});
        block(s.body);
        return;
      }
      case Stmt::For: {
        const int it = expr(s.value);
        record({it});
        store(s.target, it);
        block(s.body);
        record({it});
        return;
      }
      case Stmt::Def: {
        Frame f;
        f.function = true;
        scopes_.push_back(std::move(f));
        const bool was = compiling_.count(s.target) != 0;
        compiling_.insert(s.target);
        std::vector<int> before;
        for (const std::string& p : s.params) {
          const int g = fresh();
          store(p, g);
          before.push_back(g);
        }
        block(s.body);
        int ret = scopes_.back().ret;
        if (ret < 0) {
          if (none_ < 0) none_ = fresh();
          ret = none_;
        }
        std::vector<int> after;
        for (const std::string& p : s.params) after.push_back(lookup(p, false));
        scopes_.pop_back();
        if (!was) compiling_.erase(s.target);
        std::vector<int> signature = {fresh()};
        signature.insert(signature.end(), before.begin(), before.end());
        signature.push_back(ret);
        signature.insert(signature.end(), after.begin(), after.end());
        const int compiled = record(signature);
        functions_.insert(compiled);
        store(s.target, compiled);
        return;
      }
    }
  }

  int misuse_site_;
  std::vector<Frame> scopes_;
  std::set<std::string> compiling_;
  std::set<int> functions_;
  int none_ = -1;
};

// ---- generation -----------------------------------------------------------------

class Generator {
 public:
  Generator(std::mt19937_64& rng, const SynthOptions& options) : rng_(rng), options_(options) {}

  Program build() {
    Program p;
    const int n_themes = 1 + pick(std::max(1, options_.max_themes));
    std::vector<int> all(themes().size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    for (int i = 0; i < n_themes; ++i) {
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(i + pick(static_cast<int>(all.size()) - i))]);
      active_.push_back(all[static_cast<std::size_t>(i)]);
    }
    bound_.assign(themes().size(), {});
    const int target = options_.min_statements + pick(options_.max_statements - options_.min_statements + 1);

    if (options_.allow_defs) {
      const int defs = pick(3);
      for (int i = 0; i < defs && count_ + 3 < target; ++i) p.stmts.push_back(definition());
    }
    while (count_ < target) {
      for (Stmt& s : module_statements(target - count_)) p.stmts.push_back(std::move(s));
    }
    p.sites = sites_;
    return p;
  }

 private:
  int pick(int n) { return n <= 1 ? 0 : static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  bool chance(int percent) { return pick(100) < percent; }
  template <typename T>
  const T& one_of(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(pick(static_cast<int>(v.size())))];
  }

  Expr name(const std::string& n, bool site) {
    Expr e;
    e.kind = Expr::Name;
    e.text = n;
    if (site) e.site = sites_++;
    return e;
  }
  Expr number() {
    Expr e;
    e.kind = Expr::Num;
    e.text = one_of(kNumbers);
    return e;
  }
  Expr call(const std::string& callee, std::vector<Expr> args) {
    Expr e;
    e.kind = Expr::Call;
    e.text = callee;
    e.args = std::move(args);
    return e;
  }
  Expr binary(Expr::Kind kind, const std::string& op, Expr l, Expr r) {
    Expr e;
    e.kind = kind;
    e.text = op;
    e.args.push_back(std::move(l));
    e.args.push_back(std::move(r));
    return e;
  }
  Stmt assign(const std::string& target, Expr value) {
    ++count_;
    Stmt s;
    s.kind = Stmt::Assign;
    s.target = target;
    s.value = std::move(value);
    return s;
  }

  int theme() { return one_of(active_); }
  const std::string& quantity(int t) { return one_of(themes()[static_cast<std::size_t>(t)].quantities); }

  // A bound quantity of theme t; binds one first when none exists.
  std::string operand(int t, std::vector<Stmt>& prelude) {
    auto& b = bound_[static_cast<std::size_t>(t)];
    if (b.empty()) {
      const std::string q = quantity(t);
      prelude.push_back(source(t, q));
      return q;
    }
    return one_of(std::vector<std::string>(b.begin(), b.end()));
  }

  // Like operand() but avoids repeating `avoid` when another choice exists.
  std::string other_operand(int t, const std::string& avoid, std::vector<Stmt>& prelude) {
    auto& b = bound_[static_cast<std::size_t>(t)];
    if (b.size() == 1 && *b.begin() == avoid) {
      const auto& qs = themes()[static_cast<std::size_t>(t)].quantities;
      std::vector<std::string> fresh;
      for (const std::string& q : qs) {
        if (!b.count(q)) fresh.push_back(q);
      }
      if (!fresh.empty() && chance(70)) {
        const std::string q = one_of(fresh);
        prelude.push_back(source(t, q));
        return q;
      }
    }
    std::string out = operand(t, prelude);
    for (int tries = 0; tries < 4 && out == avoid; ++tries) out = operand(t, prelude);
    return out;
  }

  Stmt source(int t, const std::string& q) {
    const Theme& th = themes()[static_cast<std::size_t>(t)];
    Expr value;
    if (chance(25)) {
      value.kind = Expr::Method;
      value.text = "get_" + q;
      value.args.push_back(name(one_of(th.inputs), false));
    } else {
      value = call(one_of(kSources) + q, {name(one_of(th.inputs), true)});
    }
    bound_[static_cast<std::size_t>(t)].insert(q);
    return assign(q, std::move(value));
  }

  Stmt transform(int t, std::vector<Stmt>& prelude) {
    const std::string out = quantity(t);
    std::vector<Expr> args;
    auto def = defined_.find(out);
    std::string callee;
    int arity;
    if (def != defined_.end() && def->second.first == t) {
      callee = "compute_" + out;
      arity = def->second.second;
    } else {
      callee = one_of(kProducers) + out;
      arity = 1 + pick(2);
    }
    std::string prev;
    for (int i = 0; i < arity; ++i) {
      prev = i == 0 ? operand(t, prelude) : other_operand(t, prev, prelude);
      args.push_back(name(prev, true));
    }
    bound_[static_cast<std::size_t>(t)].insert(out);
    return assign(out, call(callee, std::move(args)));
  }

  Stmt combine(int t, std::vector<Stmt>& prelude) {
    const std::string out = quantity(t);
    const std::string a = operand(t, prelude);
    Expr l = name(a, false);
    Expr r = chance(60) ? name(other_operand(t, a, prelude), false) : number();
    bound_[static_cast<std::size_t>(t)].insert(out);
    return assign(out, binary(Expr::BinOp, one_of(kArith), std::move(l), std::move(r)));
  }

  Stmt sink(int t, std::vector<Stmt>& prelude) {
    ++count_;
    Stmt s;
    s.kind = Stmt::ExprCall;
    const std::string q = operand(t, prelude);
    std::vector<Expr> args = {name(q, true)};
    if (chance(30)) args.push_back(name(other_operand(t, q, prelude), true));
    s.value = call(one_of(kSinks) + q, std::move(args));
    return s;
  }

  Stmt aug(int t, std::vector<Stmt>& prelude) {
    ++count_;
    Stmt s;
    s.kind = Stmt::Aug;
    s.target = operand(t, prelude);
    s.op = chance(50) ? "+=" : "-=";
    s.value = chance(50) ? name(other_operand(t, s.target, prelude), false) : number();
    return s;
  }

  Stmt simple(int t, std::vector<Stmt>& prelude) {
    switch (pick(5)) {
      case 0:
      case 1:
        return transform(t, prelude);
      case 2:
        return combine(t, prelude);
      case 3:
        return sink(t, prelude);
      default:
        return aug(t, prelude);
    }
  }

  Expr condition(int t, std::vector<Stmt>& prelude) {
    const std::string a = operand(t, prelude);
    Expr l = name(a, false);
    Expr r = chance(50) ? name(other_operand(t, a, prelude), false) : number();
    return binary(Expr::Compare, one_of(kCompare), std::move(l), std::move(r));
  }

  std::vector<Stmt> body(int t, int n) {
    std::vector<Stmt> out;
    for (int i = 0; i < n; ++i) {
      std::vector<Stmt> prelude;
      Stmt s = simple(t, prelude);
      for (Stmt& p : prelude) out.push_back(std::move(p));
      out.push_back(std::move(s));
    }
    return out;
  }

  void emit(std::vector<Stmt>& prelude, Stmt s, std::vector<Stmt>& into) {
    for (Stmt& p : prelude) into.push_back(std::move(p));
    into.push_back(std::move(s));
  }

  std::vector<Stmt> module_statements(int remaining) {
    std::vector<Stmt> out;
    std::vector<Stmt> prelude;
    const int t = theme();
    const int roll = pick(100);
    if (roll < 14 && remaining >= 3) {
      ++count_;
      Stmt s;
      s.kind = Stmt::If;
      s.value = condition(t, prelude);
      s.body = body(t, 1 + pick(2));
      if (chance(40)) s.orelse = body(t, 1);
      emit(prelude, std::move(s), out);
    } else if (roll < 24 && remaining >= 4 && options_.allow_loops) {
      const Theme& th = themes()[static_cast<std::size_t>(t)];
      Expr list;
      list.kind = Expr::List;
      const int items = 2 + pick(2);
      std::string prev;
      for (int i = 0; i < items; ++i) {
        prev = i == 0 ? operand(t, prelude) : other_operand(t, prev, prelude);
        list.args.push_back(name(prev, false));
      }
      const std::string list_name = th.unit + "s";
      Stmt make = assign(list_name, std::move(list));
      emit(prelude, std::move(make), out);
      ++count_;
      Stmt loop;
      loop.kind = Stmt::For;
      loop.target = th.unit;
      loop.value = name(list_name, false);
      ++count_;
      Stmt inner;
      inner.kind = Stmt::ExprCall;
      inner.value = call(one_of(kSinks) + quantity(t), {name(th.unit, true)});
      loop.body.push_back(std::move(inner));
      if (chance(50)) {
        std::vector<Stmt> more = body(t, 1);
        for (Stmt& m : more) loop.body.push_back(std::move(m));
      }
      out.push_back(std::move(loop));
    } else if (roll < 30 && remaining >= 3 && options_.allow_loops) {
      ++count_;
      Stmt s;
      s.kind = Stmt::While;
      s.value = condition(t, prelude);
      s.body = body(t, 1);
      emit(prelude, std::move(s), out);
    } else {
      Stmt s = simple(t, prelude);
      emit(prelude, std::move(s), out);
    }
    return out;
  }

  Stmt definition() {
    const int t = theme();
    const Theme& th = themes()[static_cast<std::size_t>(t)];
    std::vector<std::string> pool = th.quantities;
    const std::string out = pool[static_cast<std::size_t>(pick(static_cast<int>(pool.size())))];
    pool.erase(std::find(pool.begin(), pool.end(), out));
    const int arity = 1 + pick(2);
    Stmt d;
    d.kind = Stmt::Def;
    d.target = "compute_" + out;
    for (int i = 0; i < arity; ++i) {
      const int k = pick(static_cast<int>(pool.size()));
      d.params.push_back(pool[static_cast<std::size_t>(k)]);
      pool.erase(pool.begin() + k);
    }
    ++count_;
    Stmt first;
    first.kind = Stmt::Assign;
    first.target = out;
    Expr r = arity > 1 ? name(d.params[1], false) : number();
    first.value = binary(Expr::BinOp, one_of(kArith), name(d.params[0], false), std::move(r));
    ++count_;
    d.body.push_back(std::move(first));
    if (chance(50)) {
      ++count_;
      Stmt adjust;
      adjust.kind = Stmt::Assign;
      adjust.target = out;
      adjust.value = call(one_of(kProducers) + out, {name(out, true)});
      d.body.push_back(std::move(adjust));
    }
    ++count_;
    Stmt ret;
    ret.kind = Stmt::Return;
    ret.value = name(out, false);
    d.body.push_back(std::move(ret));
    defined_[out] = {t, arity};
    return d;
  }

  std::mt19937_64& rng_;
  const SynthOptions& options_;
  std::vector<int> active_;
  std::vector<std::set<std::string>> bound_;
  std::map<std::string, std::pair<int, int>> defined_;
  int count_ = 0;
  int sites_ = 0;
};

Expr* find_site(std::vector<Stmt>& stmts, int site);

Expr* find_site(Expr& e, int site) {
  if (e.kind == Expr::Name && e.site == site) return &e;
  for (Expr& a : e.args) {
    if (Expr* f = find_site(a, site)) return f;
  }
  return nullptr;
}

Expr* find_site(std::vector<Stmt>& stmts, int site) {
  for (Stmt& s : stmts) {
    if (Expr* f = find_site(s.value, site)) return f;
    if (Expr* f = find_site(s.body, site)) return f;
    if (Expr* f = find_site(s.orelse, site)) return f;
  }
  return nullptr;
}

const std::map<std::string, int>& name_themes() {
  static const std::map<std::string, int> m = [] {
    std::map<std::string, int> out;
    for (std::size_t t = 0; t < themes().size(); ++t) {
      const Theme& th = themes()[t];
      for (const std::string& q : th.quantities) out[q] = static_cast<int>(t);
      for (const std::string& q : th.inputs) out[q] = static_cast<int>(t);
      out[th.unit] = static_cast<int>(t);
      out[th.unit + "s"] = static_cast<int>(t);
    }
    return out;
  }();
  return m;
}

int theme_of(const std::string& name) {
  auto it = name_themes().find(name);
  return it == name_themes().end() ? -1 : it->second;
}

SynthOracle oracle_for(const Program& p, int misuse_site) {
  Symbolic sym(misuse_site);
  sym.block(p.stmts);
  SynthOracle o;
  o.statement_count = sym.statements;
  o.object_count = sym.objects;
  o.record_count = sym.records;
  o.dfg_edges = sym.edges;
  std::sort(o.dfg_edges.begin(), o.dfg_edges.end());
  o.bound_names.assign(sym.bound.begin(), sym.bound.end());
  if (misuse_site >= 0) {
    o.source_record = sym.source_record;
    o.misused_arg_index = sym.arg_index;
    o.misuse_object = sym.view;
    std::vector<char> seen(static_cast<std::size_t>(sym.objects), 0);
    std::vector<int> stack = {sym.view};
    seen[static_cast<std::size_t>(sym.view)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& [a, b] : sym.edges) {
        if (a == u && !seen[static_cast<std::size_t>(b)]) {
          seen[static_cast<std::size_t>(b)] = 1;
          stack.push_back(b);
        }
      }
    }
    for (int i = 0; i < sym.objects; ++i) {
      if (seen[static_cast<std::size_t>(i)]) o.contaminated.push_back(i);
    }
  }
  return o;
}

SynthScript finish(const Program& p, int misuse_site) {
  Renderer r(p.sites);
  r.block(p.stmts, 0);
  SynthScript s;
  s.code = std::move(r.out);
  s.oracle = oracle_for(p, misuse_site);
  if (misuse_site >= 0) {
    s.has_misuse = true;
    s.misuse_offset = r.offsets[static_cast<std::size_t>(misuse_site)];
  }
  return s;
}

// Swaps one call-argument identifier for another visible value; false when
// the program has no eligible site.
bool inject(Program& p, std::mt19937_64& rng, SynthScript& out) {
  Symbolic clean(-1);
  clean.block(p.stmts);
  struct Option {
    const SiteInfo* site;
    std::vector<std::string> preferred;
    std::vector<std::string> fallback;
  };
  std::vector<Option> options;
  for (const SiteInfo& site : clean.sites) {
    if (!site.was_bound) continue;
    Option o{&site, {}, {}};
    for (const auto& [name, obj] : site.visible) {
      if (name == site.name || obj == site.object) continue;
      const int a = theme_of(name);
      const int b = theme_of(site.name);
      (a != b ? o.preferred : o.fallback).push_back(name);
    }
    if (!o.preferred.empty() || !o.fallback.empty()) options.push_back(std::move(o));
  }
  if (options.empty()) return false;
  const Option& o = options[static_cast<std::size_t>(rng() % options.size())];
  const std::vector<std::string>& pool = o.preferred.empty() ? o.fallback : o.preferred;
  const std::string wrong = pool[static_cast<std::size_t>(rng() % pool.size())];
  Expr* e = find_site(p.stmts, o.site->site);
  if (!e) throw InternalFault("synthetic site vanished");
  const std::string correct = e->text;
  e->text = wrong;
  out = finish(p, o.site->site);
  out.correct_name = correct;
  out.wrong_name = wrong;
  return true;
}

}  // namespace

std::vector<SynthScript> synthesize(std::uint64_t seed, int count, const SynthOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<SynthScript> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    Generator gen(rng, options);
    out.push_back(finish(gen.build(), -1));
  }
  return out;
}

std::vector<SynthScript> synthesize_misuse(std::uint64_t seed, int count, const SynthOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<SynthScript> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  while (static_cast<int>(out.size()) < count) {
    const bool misuse = (rng() & 1U) != 0;
    Generator gen(rng, options);
    Program p = gen.build();
    if (!misuse) {
      out.push_back(finish(p, -1));
      continue;
    }
    SynthScript s;
    if (inject(p, rng, s)) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ni
