#include "laacoex/wifi_chain.hpp"

#include <ostream>

namespace laacoex {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::MC: return "MC";
    case Regime::OW: return "OW";
    case Regime::OL: return "OL";
  }
  return "?";
}

InnerMatrix build_inner_matrix(const SystemConfig& cfg, Regime regime) {
  const WifiStateSpace space(cfg);
  InnerMatrix m;
  m.regime = regime;
  m.p_b = 0.0;
  m.p_o = cfg.p_complete();
  switch (regime) {
    case Regime::MC:
      m.p_c = 1.0;
      m.overlap_flag = false;
      break;
    case Regime::OW:
      m.p_c = 0.0;
      m.overlap_flag = false;
      break;
    case Regime::OL:
      m.p_c = 1.0;
      m.overlap_flag = true;
      break;
  }

  const int stages = space.num_stages();
  const int top = stages - 1;
  const auto collision_stage = [&](int stage) {
    if (stage < top) return stage + 1;
    return cfg.wifi_saturate_at_max ? top : 0;  // retry limit
  };

  m.P = SparseRowMatrix(space.size(), space.size());
  const double p_o = m.p_o;

  const auto emit_completion = [&](double mass, int from_stage) {
    // Collision branch: uniform redraw over the escalated stage's window.
    if (m.p_c > 0.0) {
      const int t = collision_stage(from_stage);
      const int w = space.window(t);
      const double per = mass * m.p_c / w;
      for (int k = 0; k < w; ++k) m.P.push(space.backoff_index(t, k), per);
    }
    // Success branch: uniform redraw over stage 0.
    if (m.p_c < 1.0) {
      const int w0 = space.window(0);
      const double per = mass * (1.0 - m.p_c) / w0;
      for (int k = 0; k < w0; ++k) m.P.push(space.backoff_index(0, k), per);
    }
  };

  for (int i = 0; i < stages; ++i) {
    const int w = space.window(i);
    for (int k = 0; k < w; ++k) {
      m.P.begin_row(space.backoff_index(i, k));
      if (k >= 1) {
        m.P.push(space.backoff_index(i, k - 1), 1.0);  // counter always decrements
        continue;
      }
      // (i,0): transmitting.
      if (p_o < 1.0) {
        const int cont = m.overlap_flag ? space.overlap_index(i) : space.backoff_index(i, 0);
        m.P.push(cont, 1.0 - p_o);
      }
      emit_completion(p_o, i);
    }
  }
  for (int i = 0; i < stages; ++i) {
    m.P.begin_row(space.overlap_index(i));
    if (p_o < 1.0) m.P.push(space.overlap_index(i), 1.0 - p_o);
    // An overlap packet touched an MCOT, so completion is a collision in
    // every regime.
    const int t = collision_stage(i);
    const int w = space.window(t);
    for (int k = 0; k < w; ++k) m.P.push(space.backoff_index(t, k), p_o / w);
  }
  m.P.finish();
  return m;
}

void dump_triplets(const InnerMatrix& m, std::ostream& os) {
  os << "# regime " << regime_name(m.regime) << " p_c " << m.p_c << " p_o " << m.p_o << '\n';
  for (const auto& e : m.P.entries()) {
    os << e.row << ' ' << e.col << ' ' << e.value << '\n';
  }
}

}  // namespace laacoex
