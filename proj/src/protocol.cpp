#include "mimc/protocol.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace mimc {

ParseError::ParseError(Code code, int line, int column, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ":" +
                                        std::to_string(column) + ": " + message
                                  : message),
      code_(code),
      line_(line),
      column_(column) {}

int ProtocolSpec::role_index(std::string_view name) const {
  for (std::size_t i = 0; i < roles.size(); ++i) {
    if (roles[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int ProtocolSpec::variable_index(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const Atom* ProtocolSpec::find_agent(std::string_view name) const {
  for (const auto& a : agents) {
    if (a.name == name) return &a;
  }
  if (intruder.name == name) return &intruder;
  return nullptr;
}

std::uint32_t ProtocolSpec::size_for(AtomKind kind) const {
  auto it = kind_sizes.find(kind);
  return it == kind_sizes.end() ? 1 : it->second;
}

std::optional<Key> ProtocolSpec::resolve_key(const KeyRef& ref,
                                             std::string_view agent_name) const {
  if (ref.function.empty()) {
    for (const auto& s : symkeys) {
      if (s.atom.name == ref.argument) return Key::symmetric(s.atom);
    }
    return std::nullopt;
  }
  for (const auto& kp : keypairs) {
    Atom pub{AtomKind::PublicKey, kp.public_name + "(" + std::string(agent_name) + ")",
             size_for(AtomKind::PublicKey)};
    Atom priv{AtomKind::PrivateKey, kp.private_name + "(" + std::string(agent_name) + ")",
              size_for(AtomKind::PrivateKey)};
    if (ref.function == kp.public_name) return Key::asymmetric(pub, priv);
    if (ref.function == kp.private_name) return Key{priv, pub};
  }
  return std::nullopt;
}

std::vector<Atom> ProtocolSpec::public_keys() const {
  std::vector<Atom> out;
  std::vector<Atom> everyone = agents;
  everyone.push_back(intruder);
  for (const auto& kp : keypairs) {
    for (const auto& a : everyone) {
      out.push_back(Atom{AtomKind::PublicKey, kp.public_name + "(" + a.name + ")",
                         size_for(AtomKind::PublicKey)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexing

namespace {

struct Token {
  enum class Kind { Ident, Number, Symbol, End };
  Kind kind = Kind::End;
  std::string text;
  int column = 0;
};

std::vector<Token> tokenize(std::string_view line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.column = static_cast<int>(i) + 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() &&
             (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) {
        ++j;
      }
      t.kind = Token::Kind::Ident;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      t.kind = Token::Kind::Number;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      t.kind = Token::Kind::Symbol;
      t.text = "->";
      i += 2;
    } else if (std::string_view("{}(),.:=|").find(c) != std::string_view::npos) {
      t.kind = Token::Kind::Symbol;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw ParseError(ParseError::Code::Syntax, line_no, static_cast<int>(i) + 1,
                       std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.column = static_cast<int>(line.size()) + 1;
  out.push_back(end);
  return out;
}

class LineCursor {
 public:
  LineCursor(std::vector<Token> tokens, int line) : tokens_(std::move(tokens)), line_(line) {}

  const Token& peek() const { return tokens_[pos_]; }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  int line() const { return line_; }

  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Token::Kind::End) ++pos_;
    return t;
  }

  bool accept(std::string_view symbol) {
    if (peek().kind == Token::Kind::Symbol && peek().text == symbol) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(std::string_view symbol) {
    if (!accept(symbol)) fail("expected '" + std::string(symbol) + "'");
  }

  const Token& ident(const std::string& what) {
    if (peek().kind != Token::Kind::Ident) fail("expected " + what);
    return next();
  }

  int number(const std::string& what) {
    if (peek().kind != Token::Kind::Number) fail("expected " + what);
    return std::stoi(next().text);
  }

  void expect_end() {
    if (!at_end()) fail("unexpected '" + peek().text + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(ParseError::Code::Syntax, line_, peek().column, msg);
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int line_;
};

// ---------------------------------------------------------------------------
// Parsing

struct PendingSize {
  std::string name;
  std::uint32_t size;
  int line;
  int column;
};

struct PendingFresh {
  std::string role;
  std::string var;
  int line;
  int column;
};

struct PendingTyping {
  std::string var;
  bool typed;
  int line;
  int column;
};

/// Position of each variable occurrence, for error reporting.
struct VarUse {
  int var;
  int line;
  int column;
};

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) {
    std::size_t start = 0;
    int line_no = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      auto tokens = tokenize(text.substr(start, end - start), line_no);
      if (tokens.size() > 1) lines_.emplace_back(std::move(tokens), line_no);
      if (end == text.size()) break;
      start = end + 1;
    }
  }

  ProtocolSpec parse() {
    if (lines_.empty()) {
      throw ParseError(ParseError::Code::Syntax, 1, 1, "empty protocol description");
    }
    auto& header = lines_[0];
    if (header.ident("'protocol'").text != "protocol") {
      throw ParseError(ParseError::Code::Syntax, header.line(), 1,
                       "expected 'protocol <name>'");
    }
    spec_.name = header.ident("protocol name").text;
    header.expect_end();

    std::size_t i = 1;
    bool seen_decl = false;
    bool seen_narr = false;
    while (i < lines_.size()) {
      auto& cur = lines_[i];
      const Token& kw = cur.ident("section keyword");
      std::string section = kw.text;
      int line = cur.line();
      cur.expect_end();
      std::size_t j = i + 1;
      while (j < lines_.size() && !is_end(lines_[j])) ++j;
      if (j == lines_.size()) {
        throw ParseError(ParseError::Code::Syntax, line, 1,
                         "section '" + section + "' is missing 'end'");
      }
      if (section == "declarations") {
        if (seen_decl) dup(line, 1, "declarations section");
        seen_decl = true;
        for (std::size_t k = i + 1; k < j; ++k) declaration(lines_[k]);
        finish_declarations();
      } else if (section == "narration") {
        if (!seen_decl) {
          throw ParseError(ParseError::Code::Syntax, line, 1,
                           "narration must follow declarations");
        }
        if (seen_narr) dup(line, 1, "narration section");
        seen_narr = true;
        for (std::size_t k = i + 1; k < j; ++k) narration_step(lines_[k]);
        build_roles();
      } else if (section == "goals") {
        if (!seen_narr) {
          throw ParseError(ParseError::Code::Syntax, line, 1, "goals must follow narration");
        }
        for (std::size_t k = i + 1; k < j; ++k) goal(lines_[k]);
      } else if (section == "sessions") {
        if (!seen_narr) {
          throw ParseError(ParseError::Code::Syntax, line, 1,
                           "sessions must follow narration");
        }
        for (std::size_t k = i + 1; k < j; ++k) session(lines_[k]);
      } else {
        throw ParseError(ParseError::Code::Syntax, line, kw.column,
                         "unknown section '" + section + "'");
      }
      i = j + 1;
    }
    if (!seen_narr) {
      throw ParseError(ParseError::Code::Syntax, lines_.back().line(), 1,
                       "missing narration section");
    }
    return std::move(spec_);
  }

 private:
  static bool is_end(const LineCursor& c) {
    return c.peek().kind == Token::Kind::Ident && c.peek().text == "end";
  }

  [[noreturn]] static void dup(int line, int col, const std::string& what) {
    throw ParseError(ParseError::Code::Duplicate, line, col, "duplicate " + what);
  }

  void claim_name(const Token& t, int line) {
    if (!names_.insert(t.text).second) dup(line, t.column, "declaration of '" + t.text + "'");
  }

  void declaration(LineCursor& c) {
    const Token& kw = c.ident("declaration keyword");
    const int line = c.line();
    if (kw.text == "roles") {
      while (!c.at_end()) {
        const Token& t = c.ident("role name");
        claim_name(t, line);
        Variable v;
        v.name = t.text;
        v.kind = AtomKind::Agent;
        v.is_role = true;
        spec_.variables.push_back(v);
        RoleScript r;
        r.name = t.text;
        r.var = static_cast<int>(spec_.variables.size()) - 1;
        spec_.roles.push_back(r);
      }
    } else if (kw.text == "agents") {
      while (!c.at_end()) {
        const Token& t = c.ident("agent name");
        claim_name(t, line);
        spec_.agents.push_back(Atom{AtomKind::Agent, t.text, 0});
      }
    } else if (kw.text == "intruder") {
      const Token& t = c.ident("intruder name");
      if (!spec_.intruder.name.empty()) dup(line, t.column, "intruder");
      claim_name(t, line);
      spec_.intruder = Atom{AtomKind::Agent, t.text, 0};
      c.expect_end();
    } else if (kw.text == "keypair") {
      const Token& pub = c.ident("public key function");
      claim_name(pub, line);
      const Token& priv = c.ident("private key function");
      claim_name(priv, line);
      spec_.keypairs.push_back({pub.text, priv.text});
      c.expect_end();
    } else if (kw.text == "symkey") {
      const Token& t = c.ident("key name");
      claim_name(t, line);
      SymmetricKeyDecl decl;
      decl.atom = Atom{AtomKind::SymmetricKey, t.text, 0};
      if (c.at_end()) {
        throw ParseError(ParseError::Code::KeyWithoutOwner, line, t.column,
                         "symmetric key '" + t.text + "' has no declared owner");
      }
      const Token& o = c.ident("'owners'");
      if (o.text != "owners") c.fail("expected 'owners'");
      while (!c.at_end()) {
        const Token& a = c.ident("owner agent");
        owner_uses_.push_back({a.text, line, a.column});
        decl.owners.push_back(a.text);
      }
      if (decl.owners.empty()) {
        throw ParseError(ParseError::Code::KeyWithoutOwner, line, t.column,
                         "symmetric key '" + t.text + "' has no declared owner");
      }
      spec_.symkeys.push_back(std::move(decl));
    } else if (kw.text == "data") {
      const Token& t = c.ident("constant name");
      claim_name(t, line);
      Atom a{AtomKind::Data, t.text, 0};
      spec_.data.push_back(a);
      if (!c.at_end()) {
        if (c.ident("'public'").text != "public") c.fail("expected 'public'");
        spec_.public_data.push_back(a);
      }
      c.expect_end();
    } else if (kw.text == "fresh") {
      const Token& r = c.ident("role name");
      const Token& v = c.ident("nonce variable");
      claim_name(v, line);
      fresh_.push_back({r.text, v.text, line, r.column});
      Variable var;
      var.name = v.text;
      var.kind = AtomKind::Nonce;
      spec_.variables.push_back(var);
      c.expect_end();
    } else if (kw.text == "var") {
      const Token& v = c.ident("variable name");
      claim_name(v, line);
      const Token& k = c.ident("atom kind");
      auto kind = atom_kind_from_string(k.text);
      if (!kind) {
        throw ParseError(ParseError::Code::Syntax, line, k.column,
                         "unknown kind '" + k.text + "'");
      }
      Variable var;
      var.name = v.text;
      var.kind = *kind;
      spec_.variables.push_back(var);
      c.expect_end();
    } else if (kw.text == "size") {
      const Token& t = c.ident("kind or name");
      std::uint32_t n = static_cast<std::uint32_t>(c.number("size-class"));
      if (n == 0) {
        throw ParseError(ParseError::Code::Semantic, line, t.column,
                         "size-class must be positive");
      }
      c.expect_end();
      if (auto kind = atom_kind_from_string(t.text)) {
        if (!spec_.kind_sizes.emplace(*kind, n).second) {
          dup(line, t.column, "size for kind '" + t.text + "'");
        }
      } else {
        sizes_.push_back({t.text, n, line, t.column});
      }
    } else if (kw.text == "typed" || kw.text == "untyped") {
      while (!c.at_end()) {
        const Token& v = c.ident("variable name");
        typing_.push_back({v.text, kw.text == "typed", line, v.column});
      }
    } else {
      throw ParseError(ParseError::Code::Syntax, line, kw.column,
                       "unknown declaration '" + kw.text + "'");
    }
  }

  void finish_declarations() {
    if (spec_.intruder.name.empty()) {
      throw ParseError(ParseError::Code::Semantic, 0, 0, "no intruder declared");
    }
    if (spec_.roles.empty()) {
      throw ParseError(ParseError::Code::Semantic, 0, 0, "no roles declared");
    }
    for (const auto& f : fresh_) {
      int r = spec_.role_index(f.role);
      if (r < 0) {
        throw ParseError(ParseError::Code::Semantic, f.line, f.column,
                         "unknown role '" + f.role + "'");
      }
      spec_.variables[spec_.variable_index(f.var)].fresh_role = r;
    }
    for (const auto& o : owner_uses_) {
      if (!spec_.find_agent(o.name)) {
        throw ParseError(ParseError::Code::Semantic, o.line, o.column,
                         "unknown owner agent '" + o.name + "'");
      }
    }
    std::set<std::string> sized;
    for (const auto& s : sizes_) {
      if (!sized.insert(s.name).second) dup(s.line, s.column, "size for '" + s.name + "'");
    }
    auto override_for = [&](const std::string& name) -> std::uint32_t {
      for (const auto& s : sizes_) {
        if (s.name == name) return s.size;
      }
      return 0;
    };
    for (const auto& s : sizes_) {
      bool known = spec_.find_agent(s.name) != nullptr || spec_.variable_index(s.name) >= 0;
      for (const auto& d : spec_.data) known = known || d.name == s.name;
      for (const auto& k : spec_.symkeys) known = known || k.atom.name == s.name;
      if (!known) {
        throw ParseError(ParseError::Code::Semantic, s.line, s.column,
                         "size for unknown name '" + s.name + "'");
      }
    }
    auto fix = [&](Atom& a) {
      std::uint32_t o = override_for(a.name);
      a.size = o ? o : spec_.size_for(a.kind);
    };
    for (auto& a : spec_.agents) fix(a);
    fix(spec_.intruder);
    for (auto& d : spec_.data) fix(d);
    for (auto& d : spec_.public_data) fix(d);
    for (auto& k : spec_.symkeys) fix(k.atom);
    for (auto& v : spec_.variables) {
      if (v.is_role) continue;
      std::uint32_t o = override_for(v.name);
      v.size = o ? o : spec_.size_for(v.kind);
    }
    for (const auto& t : typing_) {
      int v = spec_.variable_index(t.var);
      if (v < 0) {
        throw ParseError(ParseError::Code::Semantic, t.line, t.column,
                         "unknown variable '" + t.var + "'");
      }
      spec_.variables[v].typed = t.typed;
    }
  }

  // pattern := item (',' item)*
  Pattern parse_pattern(LineCursor& c, std::vector<VarUse>& uses) {
    std::vector<Pattern> items;
    items.push_back(parse_item(c, uses));
    while (c.accept(",")) items.push_back(parse_item(c, uses));
    if (items.size() == 1) return std::move(items.front());
    Pattern p;
    p.kind = Pattern::Kind::Concat;
    for (auto& it : items) {
      if (it.kind == Pattern::Kind::Concat) {
        for (auto& q : it.parts) p.parts.push_back(std::move(q));
      } else {
        p.parts.push_back(std::move(it));
      }
    }
    return p;
  }

  Pattern parse_item(LineCursor& c, std::vector<VarUse>& uses) {
    if (c.accept("{")) {
      Pattern body = parse_pattern(c, uses);
      c.expect("}");
      Pattern p;
      p.kind = Pattern::Kind::Enc;
      p.parts.push_back(std::move(body));
      p.key = parse_keyref(c, uses);
      return p;
    }
    const Token& t = c.ident("message term");
    if (c.accept("(")) {
      // A key-pair function applied to a literal agent, used as a message part.
      const Token& arg = c.ident("agent name");
      c.expect(")");
      const Atom* agent = spec_.find_agent(arg.text);
      if (!agent) {
        throw ParseError(ParseError::Code::Semantic, c.line(), arg.column,
                         "key terms in message position need a literal agent");
      }
      KeyRef ref{t.text, arg.text, false};
      auto key = spec_.resolve_key(ref, agent->name);
      if (!key) {
        throw ParseError(ParseError::Code::Semantic, c.line(), t.column,
                         "unknown key function '" + t.text + "'");
      }
      Pattern p;
      p.literal = key->handle;
      return p;
    }
    return resolve_name(t, c.line(), uses);
  }

  Pattern resolve_name(const Token& t, int line, std::vector<VarUse>& uses) {
    Pattern p;
    if (int v = spec_.variable_index(t.text); v >= 0) {
      p.kind = Pattern::Kind::Var;
      p.var = v;
      uses.push_back({v, line, t.column});
      return p;
    }
    if (const Atom* a = spec_.find_agent(t.text)) {
      p.literal = *a;
      return p;
    }
    for (const auto& d : spec_.data) {
      if (d.name == t.text) {
        p.literal = d;
        return p;
      }
    }
    for (const auto& k : spec_.symkeys) {
      if (k.atom.name == t.text) {
        p.literal = k.atom;
        return p;
      }
    }
    throw ParseError(ParseError::Code::UnboundVariable, line, t.column,
                     "undeclared name '" + t.text + "'");
  }

  KeyRef parse_keyref(LineCursor& c, std::vector<VarUse>& uses) {
    const Token& t = c.ident("key");
    KeyRef ref;
    if (c.accept("(")) {
      const Token& arg = c.ident("key owner");
      c.expect(")");
      bool known_fn = false;
      for (const auto& kp : spec_.keypairs) {
        known_fn = known_fn || kp.public_name == t.text || kp.private_name == t.text;
      }
      if (!known_fn) {
        throw ParseError(ParseError::Code::KeyWithoutOwner, c.line(), t.column,
                         "unknown key function '" + t.text + "'");
      }
      ref.function = t.text;
      ref.argument = arg.text;
      if (int r = spec_.role_index(arg.text); r >= 0) {
        ref.argument_is_role = true;
        uses.push_back({spec_.roles[r].var, c.line(), arg.column});
      } else if (!spec_.find_agent(arg.text)) {
        throw ParseError(ParseError::Code::Semantic, c.line(), arg.column,
                         "key owner '" + arg.text + "' is neither a role nor an agent");
      }
      return ref;
    }
    for (const auto& k : spec_.symkeys) {
      if (k.atom.name == t.text) {
        ref.argument = t.text;
        return ref;
      }
    }
    throw ParseError(ParseError::Code::KeyWithoutOwner, c.line(), t.column,
                     "undeclared key '" + t.text + "'");
  }

  void narration_step(LineCursor& c) {
    const int line = c.line();
    int index = c.number("step number");
    int expected = static_cast<int>(spec_.steps.size()) + 1;
    if (index != expected) {
      throw ParseError(ParseError::Code::Semantic, line, 1,
                       "step " + std::to_string(index) + " out of order, expected " +
                           std::to_string(expected));
    }
    c.expect(".");
    const Token& from = c.ident("sender role");
    c.expect("->");
    const Token& to = c.ident("receiver role");
    c.expect(":");
    Step s;
    s.index = index;
    s.sender = spec_.role_index(from.text);
    s.receiver = spec_.role_index(to.text);
    if (s.sender < 0 || s.receiver < 0) {
      const Token& bad = s.sender < 0 ? from : to;
      throw ParseError(ParseError::Code::Semantic, line, bad.column,
                       "unknown role '" + bad.text + "'");
    }
    if (s.sender == s.receiver) {
      throw ParseError(ParseError::Code::Semantic, line, to.column,
                       "a role cannot send to itself");
    }
    std::vector<VarUse> uses;
    s.pattern = parse_pattern(c, uses);
    c.expect_end();
    step_uses_.push_back(std::move(uses));
    step_lines_.push_back(line);
    spec_.steps.push_back(std::move(s));
  }

  /// Which roles can open an encryption under `key` on receipt: a public-key
  /// ciphertext only by the owner role, everything else by anyone holding
  /// the key (checked per agent at instantiation).
  static bool receiver_opens(const ProtocolSpec& spec, const KeyRef& key, int receiver) {
    if (key.function.empty()) return true;
    for (const auto& kp : spec.keypairs) {
      if (key.function == kp.private_name) return true;
    }
    return key.argument_is_role && spec.role_index(key.argument) == receiver;
  }

  const VarUse& use_of(std::size_t step, int var) const {
    for (const auto& u : step_uses_[step]) {
      if (u.var == var) return u;
    }
    static const VarUse none{-1, 0, 0};
    return none;
  }

  [[noreturn]] void unbound(std::size_t step, int var, const std::string& why) const {
    const VarUse& u = use_of(step, var);
    throw ParseError(ParseError::Code::UnboundVariable, u.line ? u.line : step_lines_[step],
                     u.column ? u.column : 1,
                     "unbound variable '" + spec_.variables[var].name + "' in step " +
                         std::to_string(step + 1) + ": " + why);
  }

  void build_roles() {
    if (spec_.steps.empty()) {
      throw ParseError(ParseError::Code::Semantic, 0, 0, "narration has no steps");
    }
    for (std::size_t r = 0; r < spec_.roles.size(); ++r) {
      RoleScript& role = spec_.roles[r];
      const int ri = static_cast<int>(r);
      std::vector<bool> bound(spec_.variables.size(), false);
      bound[role.var] = true;
      std::vector<bool> fresh_done(spec_.variables.size(), false);
      bool received_any = false;

      for (std::size_t si = 0; si < spec_.steps.size(); ++si) {
        const Step& s = spec_.steps[si];
        if (s.sender == ri) {
          std::vector<int> vars;
          collect_vars(s.pattern, vars);
          for (int v : vars) {
            if (bound[v]) continue;
            const Variable& var = spec_.variables[v];
            if (var.fresh_role == ri) {
              role.actions.push_back({RoleAction::Kind::Fresh, 0, v});
              bound[v] = fresh_done[v] = true;
            } else if (var.is_role) {
              role.known_peers.push_back(v);
              bound[v] = true;
            } else {
              unbound(si, v, "role " + role.name + " sends it before learning it");
            }
          }
          check_key_args(s.pattern, bound, si, role.name);
          if (int rv = spec_.roles[s.receiver].var; !bound[rv]) {
            role.known_peers.push_back(rv);
            bound[rv] = true;
          }
          role.actions.push_back({RoleAction::Kind::Send, s.index, -1});
        } else if (s.receiver == ri) {
          bind_receive(s.pattern, bound, si, ri);
          role.actions.push_back({RoleAction::Kind::Receive, s.index, -1});
          received_any = true;
        }
      }
      (void)received_any;
      // Nonces a role generates but never sends are still created up front.
      for (std::size_t v = 0; v < spec_.variables.size(); ++v) {
        if (spec_.variables[v].fresh_role == ri && !fresh_done[v]) {
          role.actions.insert(role.actions.begin(),
                              {RoleAction::Kind::Fresh, 0, static_cast<int>(v)});
        }
      }
    }
  }

  static void collect_vars(const Pattern& p, std::vector<int>& out) {
    switch (p.kind) {
      case Pattern::Kind::Var:
        if (std::find(out.begin(), out.end(), p.var) == out.end()) out.push_back(p.var);
        break;
      case Pattern::Kind::Concat:
      case Pattern::Kind::Enc:
        for (const auto& q : p.parts) collect_vars(q, out);
        break;
      case Pattern::Kind::Literal: break;
    }
  }

  void check_key_args(const Pattern& p, std::vector<bool>& bound, std::size_t step,
                      const std::string& role) {
    if (p.kind == Pattern::Kind::Enc && p.key.argument_is_role) {
      int v = spec_.roles[spec_.role_index(p.key.argument)].var;
      if (!bound[v]) {
        // A sender encrypting for a peer must know who the peer is.
        spec_.roles[spec_.role_index(role)].known_peers.push_back(v);
        bound[v] = true;
      }
    }
    for (const auto& q : p.parts) check_key_args(q, bound, step, role);
  }

  void bind_receive(const Pattern& p, std::vector<bool>& bound, std::size_t step,
                    int receiver) {
    switch (p.kind) {
      case Pattern::Kind::Literal: return;
      case Pattern::Kind::Var:
        bound[p.var] = true;
        return;
      case Pattern::Kind::Concat:
        for (const auto& q : p.parts) bind_receive(q, bound, step, receiver);
        return;
      case Pattern::Kind::Enc: {
        if (p.key.argument_is_role) {
          int v = spec_.roles[spec_.role_index(p.key.argument)].var;
          if (!bound[v]) unbound(step, v, "key owner unknown to the receiver");
        }
        if (receiver_opens(spec_, p.key, receiver)) {
          bind_receive(p.parts.front(), bound, step, receiver);
        } else {
          std::vector<int> vars;
          collect_vars(p.parts.front(), vars);
          for (int v : vars) {
            if (!bound[v]) {
              unbound(step, v, "it sits inside an encryption the receiver cannot open");
            }
          }
        }
        return;
      }
    }
  }

  void goal(LineCursor& c) {
    const Token& kw = c.ident("goal keyword");
    Goal g;
    auto var_list = [&]() {
      while (!c.at_end()) {
        const Token& v = c.ident("variable");
        int idx = spec_.variable_index(v.text);
        if (idx < 0) {
          throw ParseError(ParseError::Code::UnboundVariable, c.line(), v.column,
                           "unknown variable '" + v.text + "'");
        }
        g.vars.push_back(idx);
      }
      if (g.vars.empty()) c.fail("expected at least one variable");
    };
    if (kw.text == "secret") {
      g.kind = Goal::Kind::Secret;
      var_list();
    } else if (kw.text == "agree") {
      g.kind = Goal::Kind::Agree;
      const Token& r = c.ident("role");
      const Token& p = c.ident("peer role");
      g.role = spec_.role_index(r.text);
      g.peer_role = spec_.role_index(p.text);
      if (g.role < 0 || g.peer_role < 0 || g.role == g.peer_role) {
        throw ParseError(ParseError::Code::Semantic, c.line(), r.column,
                         "agree needs two distinct roles");
      }
      if (c.ident("'on'").text != "on") c.fail("expected 'on'");
      var_list();
    } else {
      throw ParseError(ParseError::Code::Syntax, c.line(), kw.column,
                       "unknown goal '" + kw.text + "'");
    }
    spec_.goals.push_back(std::move(g));
  }

  void session(LineCursor& c) {
    int index = c.number("session number");
    int expected = static_cast<int>(spec_.sessions.size()) + 1;
    if (index != expected) {
      throw ParseError(ParseError::Code::Semantic, c.line(), 1,
                       "session " + std::to_string(index) + " out of order");
    }
    c.expect(":");
    SessionAssignment s;
    s.agents.resize(spec_.roles.size());
    while (!c.at_end()) {
      const Token& r = c.ident("role assignment");
      if (r.text == "cutoff") {
        s.cutoff = c.number("cutoff step");
        if (s.cutoff < 1 || s.cutoff > spec_.z()) c.fail("cutoff out of range");
        continue;
      }
      int ri = spec_.role_index(r.text);
      if (ri < 0) {
        throw ParseError(ParseError::Code::Semantic, c.line(), r.column,
                         "unknown role '" + r.text + "'");
      }
      if (!s.agents[ri].empty()) dup(c.line(), r.column, "assignment of " + r.text);
      c.expect("=");
      do {
        const Token& a = c.ident("agent");
        if (!spec_.find_agent(a.text)) {
          throw ParseError(ParseError::Code::Semantic, c.line(), a.column,
                           "unknown agent '" + a.text + "'");
        }
        s.agents[ri].push_back(a.text);
      } while (c.accept("|"));
    }
    for (std::size_t r = 0; r < s.agents.size(); ++r) {
      if (s.agents[r].empty()) {
        throw ParseError(ParseError::Code::Semantic, c.line(), 1,
                         "session " + std::to_string(index) + " leaves role " +
                             spec_.roles[r].name + " unassigned");
      }
    }
    spec_.sessions.push_back(std::move(s));
  }

  struct OwnerUse {
    std::string name;
    int line;
    int column;
  };

  std::vector<LineCursor> lines_;
  ProtocolSpec spec_;
  std::set<std::string> names_;
  std::vector<PendingSize> sizes_;
  std::vector<PendingFresh> fresh_;
  std::vector<PendingTyping> typing_;
  std::vector<OwnerUse> owner_uses_;
  std::vector<std::vector<VarUse>> step_uses_;
  std::vector<int> step_lines_;
};

}  // namespace

ProtocolSpec parse_spec(std::string_view text) { return SpecParser(text).parse(); }

ProtocolSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open protocol file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

// ---------------------------------------------------------------------------
// Printing

std::string to_text(const Pattern& p, const ProtocolSpec& spec) {
  switch (p.kind) {
    case Pattern::Kind::Literal: return p.literal.name;
    case Pattern::Kind::Var: return spec.variables[p.var].name;
    case Pattern::Kind::Concat: {
      std::string out;
      for (std::size_t i = 0; i < p.parts.size(); ++i) {
        if (i) out += ", ";
        out += to_text(p.parts[i], spec);
      }
      return out;
    }
    case Pattern::Kind::Enc: {
      std::string key = p.key.function.empty()
                            ? p.key.argument
                            : p.key.function + "(" + p.key.argument + ")";
      return "{" + to_text(p.parts.front(), spec) + "}" + key;
    }
  }
  return {};
}

std::string to_text(const ProtocolSpec& spec) {
  std::ostringstream out;
  out << "protocol " << spec.name << "\n\ndeclarations\n";
  out << "  roles";
  for (const auto& r : spec.roles) out << ' ' << r.name;
  out << '\n';
  if (!spec.agents.empty()) {
    out << "  agents";
    for (const auto& a : spec.agents) out << ' ' << a.name;
    out << '\n';
  }
  out << "  intruder " << spec.intruder.name << '\n';
  for (const auto& kp : spec.keypairs) {
    out << "  keypair " << kp.public_name << ' ' << kp.private_name << '\n';
  }
  for (const auto& k : spec.symkeys) {
    out << "  symkey " << k.atom.name << " owners";
    for (const auto& o : k.owners) out << ' ' << o;
    out << '\n';
  }
  for (const auto& d : spec.data) {
    bool pub = std::find(spec.public_data.begin(), spec.public_data.end(), d) !=
               spec.public_data.end();
    out << "  data " << d.name << (pub ? " public" : "") << '\n';
  }
  for (const auto& v : spec.variables) {
    if (v.fresh_role >= 0) {
      out << "  fresh " << spec.roles[v.fresh_role].name << ' ' << v.name << '\n';
    } else if (!v.is_role) {
      out << "  var " << v.name << ' ' << to_string(v.kind) << '\n';
    }
  }
  for (const auto& [kind, size] : spec.kind_sizes) {
    out << "  size " << to_string(kind) << ' ' << size << '\n';
  }
  auto size_override = [&](const Atom& a) {
    if (a.size != spec.size_for(a.kind)) out << "  size " << a.name << ' ' << a.size << '\n';
  };
  for (const auto& a : spec.agents) size_override(a);
  size_override(spec.intruder);
  for (const auto& d : spec.data) size_override(d);
  for (const auto& k : spec.symkeys) size_override(k.atom);
  for (const auto& v : spec.variables) {
    if (!v.is_role && v.size != spec.size_for(v.kind)) {
      out << "  size " << v.name << ' ' << v.size << '\n';
    }
  }
  std::string typed, untyped;
  for (const auto& v : spec.variables) (v.typed ? typed : untyped) += ' ' + v.name;
  if (!typed.empty()) out << "  typed" << typed << '\n';
  out << "end\n\nnarration\n";
  for (const auto& s : spec.steps) {
    out << "  " << s.index << ". " << spec.roles[s.sender].name << " -> "
        << spec.roles[s.receiver].name << " : " << to_text(s.pattern, spec) << '\n';
  }
  out << "end\n";
  if (!spec.goals.empty()) {
    out << "\ngoals\n";
    for (const auto& g : spec.goals) {
      if (g.kind == Goal::Kind::Secret) {
        out << "  secret";
      } else {
        out << "  agree " << spec.roles[g.role].name << ' ' << spec.roles[g.peer_role].name
            << " on";
      }
      for (int v : g.vars) out << ' ' << spec.variables[v].name;
      out << '\n';
    }
    out << "end\n";
  }
  if (!spec.sessions.empty()) {
    out << "\nsessions\n";
    for (std::size_t i = 0; i < spec.sessions.size(); ++i) {
      const auto& s = spec.sessions[i];
      out << "  " << i + 1 << ":";
      for (std::size_t r = 0; r < s.agents.size(); ++r) {
        out << ' ' << spec.roles[r].name << '=';
        for (std::size_t k = 0; k < s.agents[r].size(); ++k) {
          out << (k ? "|" : "") << s.agents[r][k];
        }
      }
      if (s.cutoff) out << " cutoff " << s.cutoff;
      out << '\n';
    }
    out << "end\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Honest-agent semantics

SessionConfig SessionConfig::from_spec(const ProtocolSpec& spec, int n, int fake_depth) {
  if (n < 1) throw ConfigError("session count must be at least 1");
  if (n > static_cast<int>(spec.sessions.size())) {
    throw ConfigError("protocol " + spec.name + " declares only " +
                      std::to_string(spec.sessions.size()) + " session(s), " +
                      std::to_string(n) + " requested");
  }
  SessionConfig cfg;
  cfg.sessions.assign(spec.sessions.begin(), spec.sessions.begin() + n);
  cfg.fake_depth = fake_depth;
  return cfg;
}

KeyRing keys_of(const ProtocolSpec& spec, const Atom& agent) {
  KeyRing ring;
  for (const auto& kp : spec.keypairs) {
    ring.atoms.insert(Atom{AtomKind::PrivateKey, kp.private_name + "(" + agent.name + ")",
                           spec.size_for(AtomKind::PrivateKey)});
  }
  for (const auto& pk : spec.public_keys()) ring.atoms.insert(pk);
  for (const auto& k : spec.symkeys) {
    if (std::find(k.owners.begin(), k.owners.end(), agent.name) != k.owners.end()) {
      ring.atoms.insert(k.atom);
    }
  }
  return ring;
}

namespace {

std::optional<Key> key_for(const ProtocolSpec& spec, const KeyRef& ref, const Bindings& b) {
  if (ref.argument_is_role) {
    const Term& who = b[spec.roles[spec.role_index(ref.argument)].var];
    if (who.is_null()) return std::nullopt;
    return spec.resolve_key(ref, who.as_atom().name);
  }
  return spec.resolve_key(ref, ref.argument);
}

bool match_into(const ProtocolSpec& spec, const Pattern& p, const Term& in, Bindings& b,
                const KeyRing& keys) {
  switch (p.kind) {
    case Pattern::Kind::Literal:
      return in.is_atom() && in.as_atom() == p.literal;
    case Pattern::Kind::Var: {
      Term& slot = b[p.var];
      if (!slot.is_null()) return slot == in;
      const Variable& v = spec.variables[p.var];
      if (v.typed && !(in.is_atom() && in.as_atom().kind == v.kind)) return false;
      slot = in;
      return true;
    }
    case Pattern::Kind::Concat: {
      if (!in.is_concat() || in.parts().size() != p.parts.size()) return false;
      for (std::size_t i = 0; i < p.parts.size(); ++i) {
        if (!match_into(spec, p.parts[i], in.parts()[i], b, keys)) return false;
      }
      return true;
    }
    case Pattern::Kind::Enc: {
      auto key = key_for(spec, p.key, b);
      if (!key || !in.is_enc() || !(in.key() == *key)) return false;
      if (keys.holds(key->inverse)) {
        return match_into(spec, p.parts.front(), in.body(), b, keys);
      }
      // Opaque to the receiver: only an exact, fully bound match is possible.
      try {
        return build_message(spec, p, b) == in;
      } catch (const std::logic_error&) {
        return false;
      }
    }
  }
  return false;
}

}  // namespace

Term build_message(const ProtocolSpec& spec, const Pattern& p, const Bindings& b) {
  switch (p.kind) {
    case Pattern::Kind::Literal: return Term::atom(p.literal);
    case Pattern::Kind::Var: {
      const Term& t = b[p.var];
      if (t.is_null()) {
        throw std::logic_error("variable " + spec.variables[p.var].name + " is unbound");
      }
      return t;
    }
    case Pattern::Kind::Concat: {
      std::vector<Term> parts;
      parts.reserve(p.parts.size());
      for (const auto& q : p.parts) parts.push_back(build_message(spec, q, b));
      return Term::concat(std::move(parts));
    }
    case Pattern::Kind::Enc: {
      auto key = key_for(spec, p.key, b);
      if (!key) throw std::logic_error("key owner is unbound");
      return Term::enc(build_message(spec, p.parts.front(), b), *key);
    }
  }
  return Term();
}

std::optional<Bindings> match_receive(const ProtocolSpec& spec, const Pattern& pattern,
                                      const Term& incoming, const Bindings& bindings,
                                      const KeyRing& keys) {
  Bindings out = bindings;
  if (!match_into(spec, pattern, incoming, out, keys)) return std::nullopt;
  return out;
}

int action_step(const RoleAction& a) { return a.step; }

std::optional<Atom> Instance::find_atom(std::string_view name) const {
  for (const auto& a : atoms) {
    if (a.name == name) return a;
  }
  return std::nullopt;
}

namespace {

void symkeys_used(const Pattern& p, std::set<std::string>& out) {
  if (p.kind == Pattern::Kind::Enc && p.key.function.empty()) out.insert(p.key.argument);
  if (p.kind == Pattern::Kind::Literal && p.literal.kind == AtomKind::SymmetricKey) {
    out.insert(p.literal.name);
  }
  for (const auto& q : p.parts) symkeys_used(q, out);
}

}  // namespace

Instance instantiate(const ProtocolSpec& spec, const SessionConfig& config) {
  if (config.sessions.empty()) throw ConfigError("session count must be at least 1");
  if (config.fake_depth < 0) throw ConfigError("fake depth must be non-negative");
  Instance inst;
  inst.spec = &spec;
  inst.config = config;

  auto agent_atom = [&](const std::string& name) {
    const Atom* a = spec.find_agent(name);
    if (!a) throw ConfigError("unknown agent '" + name + "'");
    return *a;
  };

  for (std::size_t s = 0; s < config.sessions.size(); ++s) {
    const auto& assign = config.sessions[s];
    const int session = static_cast<int>(s) + 1;
    if (assign.agents.size() != spec.roles.size()) {
      throw ConfigError("session " + std::to_string(session) + " does not assign every role");
    }
    for (std::size_t r = 0; r < spec.roles.size(); ++r) {
      if (assign.agents[r].empty()) {
        throw ConfigError("session " + std::to_string(session) + " leaves role " +
                          spec.roles[r].name + " unassigned");
      }
      Atom agent = agent_atom(assign.agents[r].front());
      if (!spec.is_honest(agent)) continue;  // the intruder plays no role script

      const RoleScript& role = spec.roles[r];
      ProcessInfo proc;
      proc.session = session;
      proc.role = static_cast<int>(r);
      proc.agent = agent;
      proc.keys = keys_of(spec, agent);
      proc.initial.assign(spec.variables.size(), Term());
      proc.initial[role.var] = Term::atom(agent);

      for (const auto& act : role.actions) {
        if (act.kind != RoleAction::Kind::Fresh) continue;
        const Variable& v = spec.variables[act.var];
        Atom nonce{v.kind, v.name + "#" + std::to_string(session), v.size};
        proc.initial[act.var] = Term::atom(nonce);
        inst.fresh_nonces.push_back(nonce);
      }
      for (int peer_var : role.known_peers) {
        int peer_role = -1;
        for (std::size_t q = 0; q < spec.roles.size(); ++q) {
          if (spec.roles[q].var == peer_var) peer_role = static_cast<int>(q);
        }
        std::vector<Atom> options;
        for (const auto& name : assign.agents[peer_role]) options.push_back(agent_atom(name));
        if (options.size() == 1) {
          proc.initial[peer_var] = Term::atom(options.front());
        } else {
          auto first = std::find_if(role.actions.begin(), role.actions.end(), [](auto& a) {
            return a.kind != RoleAction::Kind::Fresh;
          });
          if (first == role.actions.end() || first->kind != RoleAction::Kind::Send) {
            throw ConfigError("role " + role.name +
                              " cannot choose a peer: its first action is a receive");
          }
          proc.peer_choices.emplace_back(peer_var, std::move(options));
        }
      }

      std::set<std::string> needed;
      for (const auto& act : role.actions) {
        if (act.kind == RoleAction::Kind::Fresh) continue;
        symkeys_used(spec.steps[act.step - 1].pattern, needed);
      }
      for (const auto& k : needed) {
        auto it = std::find_if(spec.symkeys.begin(), spec.symkeys.end(),
                               [&](auto& d) { return d.atom.name == k; });
        if (it != spec.symkeys.end() && !proc.keys.holds(it->atom)) {
          throw ConfigError("agent " + agent.name + " lacks key " + k + " required by role " +
                            role.name);
        }
      }
      inst.processes.push_back(std::move(proc));
    }
  }

  std::set<Atom> all;
  for (const auto& a : spec.agents) all.insert(a);
  all.insert(spec.intruder);
  std::vector<Atom> everyone = spec.agents;
  everyone.push_back(spec.intruder);
  for (const auto& a : everyone) {
    for (const auto& k : keys_of(spec, a).atoms) all.insert(k);
  }
  for (const auto& k : spec.symkeys) all.insert(k.atom);
  for (const auto& d : spec.data) all.insert(d);
  for (const auto& n : inst.fresh_nonces) all.insert(n);
  inst.atoms.assign(all.begin(), all.end());
  return inst;
}


LocalState initial_local_state(const ProcessInfo& info) {
  LocalState ls;
  ls.bindings = info.initial;
  return ls;
}

namespace {

// Skips fresh actions; nonces are bound when the process is created.
int next_io(const RoleScript& role, int pc) {
  while (pc < static_cast<int>(role.actions.size()) &&
         role.actions[pc].kind == RoleAction::Kind::Fresh) {
    ++pc;
  }
  return pc;
}

}  // namespace

bool can_start(const Instance& inst, int process, const LocalState& ls) {
  if (ls.status != ProcessStatus::Running || ls.pc != 0) return false;
  const RoleScript& role = inst.role_of(process);
  int pc = next_io(role, 0);
  return pc < static_cast<int>(role.actions.size()) &&
         role.actions[pc].kind == RoleAction::Kind::Send;
}

int pending_receive(const Instance& inst, int process, const LocalState& ls) {
  if (ls.status != ProcessStatus::Running) return 0;
  const RoleScript& role = inst.role_of(process);
  int pc = next_io(role, ls.pc);
  if (pc < static_cast<int>(role.actions.size()) &&
      role.actions[pc].kind == RoleAction::Kind::Receive) {
    return role.actions[pc].step;
  }
  return 0;
}

std::vector<Emission> run_until_receive(const Instance& inst, int process, LocalState& ls) {
  std::vector<Emission> out;
  const ProtocolSpec& spec = *inst.spec;
  const RoleScript& role = inst.role_of(process);
  const int n = static_cast<int>(role.actions.size());
  while (ls.status == ProcessStatus::Running) {
    ls.pc = next_io(role, ls.pc);
    if (ls.pc >= n) {
      ls.status = ProcessStatus::Done;
      break;
    }
    const RoleAction& act = role.actions[ls.pc];
    if (act.kind == RoleAction::Kind::Receive) break;
    const Step& step = spec.steps[act.step - 1];
    Emission e;
    e.step = act.step;
    e.message = build_message(spec, step.pattern, ls.bindings);
    e.recipient = ls.bindings[spec.roles[step.receiver].var].as_atom();
    out.push_back(std::move(e));
    ++ls.pc;
  }
  return out;
}

bool deliver(const Instance& inst, int process, LocalState& ls, const Term& msg) {
  const int step = pending_receive(inst, process, ls);
  if (step == 0) throw std::logic_error("process is not waiting for a message");
  const ProtocolSpec& spec = *inst.spec;
  auto matched = match_receive(spec, spec.steps[step - 1].pattern, msg, ls.bindings,
                               inst.processes[process].keys);
  if (!matched) {
    ls.status = ProcessStatus::Stopped;
    return false;
  }
  ls.bindings = std::move(*matched);
  ls.pc = next_io(inst.role_of(process), ls.pc) + 1;
  if (ls.pc >= static_cast<int>(inst.role_of(process).actions.size())) {
    ls.status = ProcessStatus::Done;
  }
  return true;
}

}  // namespace mimc
