#pragma once

// Reference values computed at 30 digits by compute_oracles.py (mpmath).

namespace natbound::oracles {

inline constexpr double kHeatHalf011 = 0.241970724519143349;     // heat kernel D=1/2, y=0, x=1, t=1
inline constexpr double kHeatHalf001 = 0.398942280401432678;     // heat kernel D=1/2, y=0, x=0, t=1
inline constexpr double kMehler001 = 0.606737998837382818;       // Mehler kernel y=0, x=0, t=1
inline constexpr double kMehler011 = 0.314687292095263880;       // Mehler kernel y=0, x=1, t=1
inline constexpr double kOu05_02_1 = 0.606557033716782060;       // OU density y=0.5, x=0.2, t=1
inline constexpr double kHilleL2Ou = 2.030078469278704976;       // L2 for b=-x from 0 to 1
inline constexpr double kHilleL2Bessel = 0.962962962962962963;   // L2 for b=1/x from 1 to 3
inline constexpr double kBesselHalf111 = 0.344951313888244626;   // Bessel a=1/2, t=1, xi0=1, xi=1
inline constexpr double kBesselI_05_1 = 0.937674888245487647;
inline constexpr double kBesselI_0_25 = 3.289839144050123036;
inline constexpr double kBesselI_13_40 = 14579493055526072.409;
inline constexpr double kHalfLineImageKernel = 0.459923682844367320;  // Mehler(0.8,1.2,.5) - Mehler(-0.8,1.2,.5)
inline constexpr double kReflection = 0.317310507862914103;     // 2 (1 - N(1))
inline constexpr double kTwoOverSqrtPi = 1.128379167095512574;
inline constexpr double kSqrtPi = 1.772453850905516027;

}  // namespace natbound::oracles
