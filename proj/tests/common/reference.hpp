#pragma once

// Reference double-integrator certificate (n_p = 4). Its vertex order is the
// reverse of the preset's, so the matrices are stored already swapped.

#include "pdrci/verify.hpp"

namespace pdrci::testdata {

inline verify::Certificate reference_double_integrator() {
  MatrixXd P1(4, 2), P2(4, 2), W(2, 2), K1(1, 2), K2(1, 2);
  P1 << -0.4111, -0.1354, 0.0303, -0.5151, 0.4867, -0.2474, 0.4884, -0.0504;
  P2 << -0.3257, -0.0854, 0.0404, -0.3823, 0.4867, -0.2474, 0.4883, -0.0506;
  W << 2.4373, -0.6691, -0.7327, 0.8379;
  K1 << -0.2246, -0.7898;
  K2 << -0.1506, -0.5601;
  verify::Certificate c;
  c.set.P = {P2, P1};
  c.set.W = W;
  c.K = {K2, K1};
  return c;
}

}  // namespace pdrci::testdata
