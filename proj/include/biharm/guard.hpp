#pragma once

namespace biharm {

// While an OracleGuard is alive on a thread, the entry points that read the
// potential (clamped solves, u1 construction, contraction estimates) throw
// StageError. Trace recovery runs under one, so it provably uses only the
// DtN difference, S and the trace of u0.
class OracleGuard {
 public:
  OracleGuard();
  ~OracleGuard();
  OracleGuard(const OracleGuard&) = delete;
  OracleGuard& operator=(const OracleGuard&) = delete;

  static bool active();
};

void check_oracle_access(const char* what);

}  // namespace biharm
