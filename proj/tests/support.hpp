#ifndef MIMC_TESTS_SUPPORT_HPP_
#define MIMC_TESTS_SUPPORT_HPP_

#include <string>

#include "mimc/protocol.hpp"
#include "mimc/terms.hpp"

namespace mimc::testing {

inline std::string protocol_path(const std::string& name) {
  return std::string(MIMC_PROTOCOL_DIR) + "/" + name;
}

inline const ProtocolSpec& nspk() {
  static const ProtocolSpec spec = load_spec_file(protocol_path("nspk.proto"));
  return spec;
}

inline Atom agent(const std::string& n) { return Atom{AtomKind::Agent, n, 16}; }
inline Atom nonce(const std::string& n, std::uint32_t size = 32) {
  return Atom{AtomKind::Nonce, n, size};
}
inline Atom pub(const std::string& owner) {
  return Atom{AtomKind::PublicKey, "pk(" + owner + ")", 64};
}
inline Atom priv(const std::string& owner) {
  return Atom{AtomKind::PrivateKey, "sk(" + owner + ")", 64};
}
inline Key pk(const std::string& owner) { return Key::asymmetric(pub(owner), priv(owner)); }

inline Term T(const Atom& a) { return Term::atom(a); }
inline Term cat(std::vector<Term> parts) { return Term::concat(std::move(parts)); }

}  // namespace mimc::testing

#endif  // MIMC_TESTS_SUPPORT_HPP_
