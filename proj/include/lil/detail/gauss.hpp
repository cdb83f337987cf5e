#pragma once

#include <array>
#include <cstddef>

// Fixed-order Gauss-Legendre rules. Nodes are stored as the positive half of
// the symmetric rule; gl() mirrors them. Orders 16/24/32 cover everything the
// library integrates: 16 for half-period oscillation panels, 24/32 for smooth
// envelopes and time integrals.

namespace lil::quad {

template <int N>
struct GaussTable;

template <>
struct GaussTable<16> {
  static constexpr int half = 8;
  static constexpr std::array<double, 8> x = {
      9.50125098376374544e-02, 2.81603550779258915e-01,
      4.58016777657227370e-01, 6.17876244402643771e-01,
      7.55404408355002999e-01, 8.65631202387831755e-01,
      9.44575023073232600e-01, 9.89400934991649939e-01};
  static constexpr std::array<double, 8> w = {
      1.89450610455068585e-01, 1.82603415044923612e-01,
      1.69156519395002619e-01, 1.49595988816576764e-01,
      1.24628971255534030e-01, 9.51585116824925914e-02,
      6.22535239386477063e-02, 2.71524594117540374e-02};
};

template <>
struct GaussTable<24> {
  static constexpr int half = 12;
  static constexpr std::array<double, 12> x = {
      6.40568928626056300e-02, 1.91118867473616311e-01,
      3.15042679696163397e-01, 4.33793507626045127e-01,
      5.45421471388839563e-01, 6.48093651936975546e-01,
      7.40124191578554358e-01, 8.20001985973902947e-01,
      8.86415527004400960e-01, 9.38274552002732798e-01,
      9.74728555971309474e-01, 9.95187219997021311e-01};
  static constexpr std::array<double, 12> w = {
      1.27938195346752215e-01, 1.25837456346828303e-01,
      1.21670472927803419e-01, 1.15505668053725613e-01,
      1.07444270115965607e-01, 9.76186521041140648e-02,
      8.61901615319532882e-02, 7.33464814110804109e-02,
      5.92985849154367417e-02, 4.42774388174195510e-02,
      2.85313886289337432e-02, 1.23412297999870909e-02};
};

template <>
struct GaussTable<32> {
  static constexpr int half = 16;
  static constexpr std::array<double, 16> x = {
      4.83076656877383104e-02, 1.44471961582796488e-01,
      2.39287362252137065e-01, 3.31868602282127667e-01,
      4.21351276130635333e-01, 5.06899908932229359e-01,
      5.87715757240762304e-01, 6.63044266930215231e-01,
      7.32182118740289711e-01, 7.94483795967942386e-01,
      8.49367613732569970e-01, 8.96321155766052202e-01,
      9.34906075937739667e-01, 9.64762255587506390e-01,
      9.85611511545268382e-01, 9.97263861849481570e-01};
  static constexpr std::array<double, 16> w = {
      9.65400885147278121e-02, 9.56387200792748332e-02,
      9.38443990808045664e-02, 9.11738786957638631e-02,
      8.76520930044039082e-02, 8.33119242269468457e-02,
      7.81938957870703111e-02, 7.23457941088484491e-02,
      6.58222227763617523e-02, 5.86840934785357038e-02,
      5.09980592623762441e-02, 4.28358980222264263e-02,
      3.42738629130216257e-02, 2.53920653092624266e-02,
      1.62743947309059653e-02, 7.01861000946929839e-03};
};

template <int N, class F>
double gl(F&& f, double a, double b) {
  using T = GaussTable<N>;
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < T::half; ++i) {
    const double dx = h * T::x[i];
    s += T::w[i] * (f(c + dx) + f(c - dx));
  }
  return s * h;
}

}  // namespace lil::quad
