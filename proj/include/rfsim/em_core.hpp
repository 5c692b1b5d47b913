// SPDX-License-Identifier: Apache-2.0
//
// Polarimetric field transforms at planar interfaces.
//
// Field phasors are carried as two complex components in a transverse basis (e1, e2) that is
// orthonormal and orthogonal to the propagation direction k. Every interaction is a 2x2 complex
// matrix, so a propagation path reduces to a product of such matrices plus basis changes.
//
// Conventions:
//   * time dependence e^{+j w t}; lossy media have Im(eta) < 0 and waves accrue e^{-j k d}.
//   * interface basis: e_perp = k_i x n / |k_i x n|, e_par = e_perp x k_i. Reflected and
//     transmitted waves keep e_perp and use e_perp x k_r (resp. k_t) as their parallel vector.
//   * Fresnel signs are chosen so that eta2 -> infinity gives r_perp = -1 and r_par = +1.
//   * the surface normal may point to either side; only |k_i . n| enters the coefficients.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>

#include "rfsim/materials.hpp"

namespace rfsim::em {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec2cT = Eigen::Matrix<std::complex<Scalar>, 2, 1>;
template <typename Scalar>
using Mat2T = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Mat2cT = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

/// Threshold on |k x n| below which incidence is treated as normal.
inline constexpr double kNormalIncidenceTolerance = 1e-9;

class NormalIncidence : public std::domain_error {
 public:
  NormalIncidence() : std::domain_error("normal incidence: plane of incidence is undefined") {}
};

class BasisMismatch : public std::invalid_argument {
 public:
  BasisMismatch() : std::invalid_argument("bases do not share a propagation direction") {}
};

template <typename Scalar = double>
struct TransverseBasis {
  Vec3T<Scalar> e1;
  Vec3T<Scalar> e2;
  Vec3T<Scalar> k;  // propagation direction

  /// Largest deviation from orthonormality of {e1, e2} and transversality to k.
  Scalar orthonormality_error() const {
    using std::abs;
    Scalar err = abs(e1.norm() - 1) + abs(e2.norm() - 1) + abs(k.norm() - 1);
    err += abs(e1.dot(e2)) + abs(e1.dot(k)) + abs(e2.dot(k));
    return err;
  }
};

template <typename Scalar = double>
struct FieldPhasor2 {
  Vec2cT<Scalar> components = Vec2cT<Scalar>::Zero();
  TransverseBasis<Scalar> basis;

  /// Complex 3-vector E = c1 e1 + c2 e2.
  Eigen::Matrix<std::complex<Scalar>, 3, 1> vector() const {
    return components(0) * basis.e1.template cast<std::complex<Scalar>>() +
           components(1) * basis.e2.template cast<std::complex<Scalar>>();
  }
  Scalar power() const { return components.squaredNorm(); }
};

template <typename Scalar = double>
struct FresnelCoefficients {
  std::complex<Scalar> r_perp{0}, r_par{0}, t_perp{1}, t_par{1};
  std::complex<Scalar> eta1{1}, eta2{1};
  Scalar cos_i = 1;
  std::complex<Scalar> cos_t{1};  // transmitted cosine on the attenuating branch

  /// Transmitted wave is evanescent (total internal reflection).
  bool evanescent() const { return cos_t.real() == Scalar(0) && cos_t.imag() != Scalar(0); }
};

// -- bases --------------------------------------------------------------------

/// Spherical unit vectors (theta_hat, phi_hat) of direction k; phi = 0 at the poles.
template <typename Scalar>
TransverseBasis<Scalar> angular_basis(const Vec3T<Scalar>& k) {
  using std::atan2;
  using std::cos;
  using std::sin;
  const Scalar z = std::clamp(k.z(), Scalar(-1), Scalar(1));
  const Scalar theta = std::acos(z);
  const Scalar phi = atan2(k.y(), k.x());
  const Scalar ct = cos(theta), st = sin(theta), cp = cos(phi), sp = sin(phi);
  return {Vec3T<Scalar>(ct * cp, ct * sp, -st), Vec3T<Scalar>(-sp, cp, Scalar(0)), k};
}

/// Interface-aligned (e_perp, e_par) basis; throws NormalIncidence when k_i is parallel to n.
template <typename Scalar>
TransverseBasis<Scalar> incidence_basis(const Vec3T<Scalar>& k_i, const Vec3T<Scalar>& n) {
  const Vec3T<Scalar> c = k_i.cross(n);
  const Scalar norm = c.norm();
  if (norm < Scalar(kNormalIncidenceTolerance)) throw NormalIncidence();
  const Vec3T<Scalar> e_perp = c / norm;
  return {e_perp, e_perp.cross(k_i), k_i};
}

/// Fixed transverse basis used at normal incidence: e_perp is k crossed with the axis on which
/// k has the smallest magnitude.
template <typename Scalar>
TransverseBasis<Scalar> normal_incidence_basis(const Vec3T<Scalar>& k) {
  int axis = 0;
  k.cwiseAbs().minCoeff(&axis);
  const Vec3T<Scalar> e_perp = k.cross(Vec3T<Scalar>::Unit(axis)).normalized();
  return {e_perp, e_perp.cross(k), k};
}

/// incidence_basis with the normal-incidence convention applied.
template <typename Scalar>
TransverseBasis<Scalar> interface_basis(const Vec3T<Scalar>& k_i, const Vec3T<Scalar>& n) {
  if (k_i.cross(n).norm() < Scalar(kNormalIncidenceTolerance)) return normal_incidence_basis(k_i);
  return incidence_basis(k_i, n);
}

/// W with W(a, b) = to_a . from_b: maps components in `from` to components in `to`.
template <typename Scalar>
Mat2T<Scalar> basis_change(const TransverseBasis<Scalar>& from, const TransverseBasis<Scalar>& to) {
  if ((from.k - to.k).norm() > Scalar(1e-9)) throw BasisMismatch();
  Mat2T<Scalar> w;
  w << to.e1.dot(from.e1), to.e1.dot(from.e2), to.e2.dot(from.e1), to.e2.dot(from.e2);
  return w;
}

// -- transfers ----------------------------------------------------------------

template <typename Scalar = double>
struct PolarizationTransfer {
  Mat2cT<Scalar> matrix = Mat2cT<Scalar>::Identity();
  TransverseBasis<Scalar> in;
  TransverseBasis<Scalar> out;

  static PolarizationTransfer identity(const TransverseBasis<Scalar>& basis) {
    return {Mat2cT<Scalar>::Identity(), basis, basis};
  }

  /// `next` applied after this transfer, re-expressing our output in next's input basis.
  PolarizationTransfer then(const PolarizationTransfer& next) const {
    const Mat2cT<Scalar> w = basis_change(out, next.in).template cast<std::complex<Scalar>>();
    return {next.matrix * w * matrix, in, next.out};
  }

  /// Re-expresses input and output in other bases spanning the same transverse planes.
  PolarizationTransfer rebased(const TransverseBasis<Scalar>& new_in,
                               const TransverseBasis<Scalar>& new_out) const {
    const Mat2cT<Scalar> w_in = basis_change(new_in, in).template cast<std::complex<Scalar>>();
    const Mat2cT<Scalar> w_out = basis_change(out, new_out).template cast<std::complex<Scalar>>();
    return {w_out * matrix * w_in, new_in, new_out};
  }

  PolarizationTransfer scaled(std::complex<Scalar> factor) const {
    return {matrix * factor, in, out};
  }

  FieldPhasor2<Scalar> apply(const FieldPhasor2<Scalar>& field) const {
    const Mat2cT<Scalar> w = basis_change(field.basis, in).template cast<std::complex<Scalar>>();
    return {matrix * (w * field.components), out};
  }
};

// -- directions -----------------------------------------------------------------

template <typename Scalar>
Vec3T<Scalar> reflect_direction(const Vec3T<Scalar>& k_i, const Vec3T<Scalar>& n) {
  return k_i - Scalar(2) * k_i.dot(n) * n;
}

/// Refracted direction from Snell's law using the real refractive indices; nullopt beyond the
/// critical angle.
template <typename Scalar>
std::optional<Vec3T<Scalar>> refract_direction(const Vec3T<Scalar>& k_i, const Vec3T<Scalar>& n,
                                               std::complex<Scalar> eta1,
                                               std::complex<Scalar> eta2) {
  const Vec3T<Scalar> n_fwd = k_i.dot(n) >= Scalar(0) ? n : Vec3T<Scalar>(-n);
  const Scalar cos_i = k_i.dot(n_fwd);
  const Scalar ratio = std::sqrt(eta1).real() / std::sqrt(eta2).real();
  const Scalar sin_t2 = ratio * ratio * (Scalar(1) - cos_i * cos_i);
  if (sin_t2 > Scalar(1)) return std::nullopt;
  const Vec3T<Scalar> tangential = k_i - cos_i * n_fwd;
  return (ratio * tangential + std::sqrt(Scalar(1) - sin_t2) * n_fwd).normalized();
}

// -- Fresnel ------------------------------------------------------------------------

/// Fresnel coefficients for a wave in medium eta1 hitting medium eta2 at incidence cosine cos_i.
template <typename Scalar>
FresnelCoefficients<Scalar> fresnel(std::complex<Scalar> eta1, std::complex<Scalar> eta2,
                                    Scalar cos_i) {
  using C = std::complex<Scalar>;
  if (!(cos_i > Scalar(0) && cos_i <= Scalar(1)))
    throw std::invalid_argument("fresnel: cos_theta_i must lie in (0, 1]");
  FresnelCoefficients<Scalar> f;
  f.eta1 = eta1;
  f.eta2 = eta2;
  f.cos_i = cos_i;
  if (eta1 == eta2) {
    f.cos_t = cos_i;
    return f;
  }
  const Scalar sin2 = Scalar(1) - cos_i * cos_i;
  C cos_t = std::sqrt(C(1) - eta1 / eta2 * sin2);
  // Beyond the critical angle the principal root is +j|.|; the decaying e^{-j k d} wave needs -j|.|.
  if (cos_t.real() == Scalar(0) && cos_t.imag() > Scalar(0)) cos_t = -cos_t;
  f.cos_t = cos_t;
  const C n1 = std::sqrt(eta1), n2 = std::sqrt(eta2);
  const C a_perp = n1 * cos_i, b_perp = n2 * cos_t;
  const C a_par = n2 * cos_i, b_par = n1 * cos_t;
  f.r_perp = (a_perp - b_perp) / (a_perp + b_perp);
  f.r_par = (a_par - b_par) / (a_par + b_par);
  f.t_perp = Scalar(2) * n1 * cos_i / (a_perp + b_perp);
  f.t_par = Scalar(2) * n1 * cos_i / (a_par + b_par);
  return f;
}

/// Power flux ratios (reflected, transmitted) for unit incident flux, per polarization.
/// Transmitted flux is scaled by Re(sqrt(eta2) cos_t) / Re(sqrt(eta1) cos_i).
template <typename Scalar>
std::pair<Vec3T<Scalar>, Vec3T<Scalar>> flux_ratios(const FresnelCoefficients<Scalar>& f) {
  const Scalar in = (std::sqrt(f.eta1) * f.cos_i).real();
  const Scalar out = (std::sqrt(f.eta2) * f.cos_t).real();
  const Scalar scale = out / in;
  Vec3T<Scalar> perp(std::norm(f.r_perp), scale * std::norm(f.t_perp), 0);
  Vec3T<Scalar> par(std::norm(f.r_par), scale * std::norm(f.t_par), 0);
  perp.z() = perp.x() + perp.y();
  par.z() = par.x() + par.y();
  return {perp, par};
}

// -- interactions --------------------------------------------------------------------

/// Specular reflection: R * diag(r_perp, r_par) * W(in -> interface), expressed in the reflected
/// basis (e_perp, e_perp x k_r).
template <typename Scalar>
PolarizationTransfer<Scalar> reflection_transfer(const TransverseBasis<Scalar>& in,
                                                 const Vec3T<Scalar>& n,
                                                 const FresnelCoefficients<Scalar>& f,
                                                 Scalar specular_factor) {
  using C = std::complex<Scalar>;
  const TransverseBasis<Scalar> iface = interface_basis(in.k, n);
  const Vec3T<Scalar> k_r = reflect_direction(in.k, n);
  const TransverseBasis<Scalar> out{iface.e1, iface.e1.cross(k_r).normalized(), k_r};
  Mat2cT<Scalar> d = Mat2cT<Scalar>::Zero();
  d(0, 0) = specular_factor * f.r_perp;
  d(1, 1) = specular_factor * f.r_par;
  const Mat2cT<Scalar> w = basis_change(in, iface).template cast<C>();
  return {d * w, in, out};
}

template <typename Scalar>
FieldPhasor2<Scalar> apply_reflection(const FieldPhasor2<Scalar>& incident, const Vec3T<Scalar>& n,
                                      const FresnelCoefficients<Scalar>& f,
                                      Scalar specular_factor) {
  return reflection_transfer(incident.basis, n, f, specular_factor).apply(incident);
}

enum class TransmissionGeometry { Refracted, Straight };

/// Transmission: diag(t_perp, t_par) * W(in -> interface). With Straight geometry the wave keeps
/// its direction (zero-thickness surface); with Refracted it follows Snell's law. An evanescent
/// transmitted wave yields a zero matrix.
template <typename Scalar>
PolarizationTransfer<Scalar> transmission_transfer(
    const TransverseBasis<Scalar>& in, const Vec3T<Scalar>& n, const FresnelCoefficients<Scalar>& f,
    TransmissionGeometry geometry = TransmissionGeometry::Refracted) {
  using C = std::complex<Scalar>;
  const TransverseBasis<Scalar> iface = interface_basis(in.k, n);
  Vec3T<Scalar> k_t = in.k;
  bool evanescent = f.evanescent();
  if (geometry == TransmissionGeometry::Refracted) {
    if (auto dir = refract_direction(in.k, n, f.eta1, f.eta2)) {
      k_t = *dir;
    } else {
      evanescent = true;
    }
  }
  const TransverseBasis<Scalar> out{iface.e1, iface.e1.cross(k_t).normalized(), k_t};
  if (evanescent) return {Mat2cT<Scalar>::Zero(), in, out};
  Mat2cT<Scalar> d = Mat2cT<Scalar>::Zero();
  d(0, 0) = f.t_perp;
  d(1, 1) = f.t_par;
  const Mat2cT<Scalar> w = basis_change(in, iface).template cast<C>();
  return {d * w, in, out};
}

template <typename Scalar>
FieldPhasor2<Scalar> apply_transmission(
    const FieldPhasor2<Scalar>& incident, const Vec3T<Scalar>& n,
    const FresnelCoefficients<Scalar>& f,
    TransmissionGeometry geometry = TransmissionGeometry::Refracted) {
  return transmission_transfer(incident.basis, n, f, geometry).apply(incident);
}

/// Gamma: fraction of incident field amplitude retained on reflection,
/// sqrt(|r_perp E_perp|^2 + |r_par E_par|^2) / |E|. Zero for a zero field.
template <typename Scalar>
Scalar reflection_ratio(const FieldPhasor2<Scalar>& incident, const Vec3T<Scalar>& n,
                        const FresnelCoefficients<Scalar>& f) {
  const Scalar norm = incident.components.norm();
  if (norm == Scalar(0)) return Scalar(0);
  const auto iface = interface_basis(incident.basis.k, n);
  const Vec2cT<Scalar> c =
      basis_change(incident.basis, iface).template cast<std::complex<Scalar>>() * incident.components;
  return std::sqrt(std::norm(f.r_perp * c(0)) + std::norm(f.r_par * c(1))) / norm;
}

struct ScatteringPhases {
  double chi1 = 0.0;
  double chi2 = 0.0;
};

/// Diffuse scattering through a surface element dA at q toward the observation point r.
///
/// Output components are in the angular basis of k_s = (r - q) / |r - q|:
///   E_s = (S / |r - q|) sqrt(f_s cos_i dA) diag(sqrt(2 (1 - K_x)) e^{j chi1}, sqrt(2 K_x) e^{j chi2}) G E_i
/// where G = W(interface -> angular(k_i)) diag(r_perp, r_par) W(in -> interface) carries the
/// reflection reduction: |G E_i| = Gamma |E_i|. The factor 2 keeps |E_s| at
/// (S Gamma / |r - q|) sqrt(f_s cos_i dA) |E_i| exactly for K_x = 1/2 and in expectation over the
/// incident polarization otherwise. A direction below the illuminated side gives a zero matrix.
template <typename Scalar>
PolarizationTransfer<Scalar> scattering_transfer(const TransverseBasis<Scalar>& in,
                                                 const Vec3T<Scalar>& q, const Vec3T<Scalar>& r,
                                                 const Vec3T<Scalar>& n, const Material& material,
                                                 Scalar d_area, const FresnelCoefficients<Scalar>& f,
                                                 ScatteringPhases phases) {
  using C = std::complex<Scalar>;
  const Vec3T<Scalar> delta = r - q;
  const Scalar distance = delta.norm();
  if (!(distance >= Scalar(1e-6))) throw std::invalid_argument("scattering: observation point coincides with q");
  if (!(d_area > Scalar(0))) throw std::invalid_argument("scattering: dA must be positive");
  const Vec3T<Scalar> k_s = delta / distance;
  const TransverseBasis<Scalar> out = angular_basis(k_s);

  const Vec3T<Scalar> n_out = in.k.dot(n) > Scalar(0) ? Vec3T<Scalar>(-n) : n;
  const Scalar cos_i = std::abs(in.k.dot(n));
  const Scalar lobe = scattering_lobe(material.lobe, in.k.template cast<double>(),
                                      k_s.template cast<double>(), n_out.template cast<double>());
  if (k_s.dot(n_out) <= Scalar(0) || lobe <= Scalar(0) || material.scattering_coefficient == 0.0)
    return {Mat2cT<Scalar>::Zero(), in, out};

  const TransverseBasis<Scalar> iface = interface_basis(in.k, n);
  Mat2cT<Scalar> r_diag = Mat2cT<Scalar>::Zero();
  r_diag(0, 0) = f.r_perp;
  r_diag(1, 1) = f.r_par;
  const Mat2cT<Scalar> g = basis_change(iface, angular_basis(in.k)).template cast<C>() * r_diag *
                           basis_change(in, iface).template cast<C>();

  const Scalar kx = material.xpd_ratio;
  Mat2cT<Scalar> split = Mat2cT<Scalar>::Zero();
  split(0, 0) = std::sqrt(Scalar(2) * (Scalar(1) - kx)) * std::polar(Scalar(1), Scalar(phases.chi1));
  split(1, 1) = std::sqrt(Scalar(2) * kx) * std::polar(Scalar(1), Scalar(phases.chi2));

  const Scalar scale = Scalar(material.scattering_coefficient) / distance *
                       std::sqrt(lobe * cos_i * d_area);
  return {scale * split * g, in, out};
}

template <typename Scalar>
FieldPhasor2<Scalar> apply_scattering(const FieldPhasor2<Scalar>& incident, const Vec3T<Scalar>& q,
                                      const Vec3T<Scalar>& r, const Vec3T<Scalar>& n,
                                      const Material& material, Scalar d_area,
                                      const FresnelCoefficients<Scalar>& f, ScatteringPhases phases) {
  return scattering_transfer(incident.basis, q, r, n, material, d_area, f, phases).apply(incident);
}

// -- free space ------------------------------------------------------------------------

/// lambda / (4 pi d) * e^{-j 2 pi d / lambda}: Friis spreading between isotropic elements plus the
/// phase accrued over d.
template <typename Scalar>
std::complex<Scalar> free_space_factor(Scalar distance, Scalar frequency_hz) {
  if (!(distance > Scalar(0))) throw std::invalid_argument("free-space distance must be positive");
  if (!(frequency_hz > Scalar(0))) throw std::invalid_argument("frequency must be positive");
  const Scalar lambda = Scalar(kSpeedOfLight) / frequency_hz;
  // Reduce the phase argument modulo one wavelength before scaling by 2 pi.
  const Scalar cycles = distance / lambda;
  const Scalar frac = cycles - std::floor(cycles);
  return std::polar(lambda / (Scalar(4 * kPi) * distance), Scalar(-2 * kPi) * frac);
}

template <typename Scalar>
FieldPhasor2<Scalar> free_space_propagate(const FieldPhasor2<Scalar>& phasor, Scalar distance,
                                          Scalar frequency_hz) {
  FieldPhasor2<Scalar> out = phasor;
  out.components *= free_space_factor(distance, frequency_hz);
  return out;
}

}  // namespace rfsim::em
