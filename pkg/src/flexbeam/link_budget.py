"""Antenna gain, carrier SNR, and Shannon-rate evaluation.

The antenna taper follows the classic Bessel model

    g(d) = g_max * (J1(u)/(2u) + 36 J3(u)/u^3)^2,   u = 2.07123 d / R,

whose scale constant places the -3 dB point exactly at the nominal beam
radius R. All dB quantities are converted to linear factors once, at
parameter-construction time; the hot path is purely linear arithmetic.

Carrier transmit power is not an input: it is calibrated so that a beam
using its uniform bandwidth share, with on-axis users, offers exactly the
per-beam design capacity. That makes total system capacity equal total
demand by construction and anchors every scenario to the same reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j1, jv

BOLTZMANN_K = 1.380649e-23  # J/K

#: Taper argument scale; chosen so g(R) = g_max / 2 (the -3 dB edge).
BESSEL_TAPER_SCALE = 2.07123


@dataclass(frozen=True)
class AntennaModel:
    """Transmit antenna: peak gain and nominal (-3 dB) beam radius."""

    g_max: float = 10.0 ** 5.2      # linear (52 dBi)
    beam_radius_km: float = 50.0
    taper_scale: float = BESSEL_TAPER_SCALE

    def __post_init__(self):
        if self.g_max <= 0 or self.beam_radius_km <= 0:
            raise ValueError("g_max and beam_radius_km must be positive")


@dataclass(frozen=True)
class LinkParams:
    """End-to-end link constants for one carrier.

    `noise_temp_k` is informational: the receiver figure of merit
    `receive_gain_over_temp_db` already folds the noise temperature in, and
    the SNR is computed exactly once as

        snr = P g(d) 10^((G/T - FSL - atm - dep)/10) / (k_B W)

    so that noise never enters the budget twice.
    """

    receive_gain_over_temp_db: float = 16.25   # dB/K
    free_space_loss_db: float = 210.0
    atmospheric_loss_db: float = 0.4
    depointing_loss_db: float = 0.5
    carrier_bandwidth_mhz: float = 62.5
    carrier_tx_power_w: float = 1.0
    boltzmann_k: float = BOLTZMANN_K
    noise_temp_k: float = 290.0

    def __post_init__(self):
        if self.carrier_bandwidth_mhz <= 0:
            raise ValueError("carrier_bandwidth_mhz must be positive")
        for name in ("free_space_loss_db", "atmospheric_loss_db", "depointing_loss_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def net_path_factor(self) -> float:
        """Linear factor 10^((G/T - FSL - atm - dep)/10), units 1/K."""
        net_db = (self.receive_gain_over_temp_db - self.free_space_loss_db
                  - self.atmospheric_loss_db - self.depointing_loss_db)
        return 10.0 ** (net_db / 10.0)

    @property
    def noise_power_w(self) -> float:
        """k_B * W for one carrier, with the kelvin folded into G/T."""
        return self.boltzmann_k * self.carrier_bandwidth_mhz * 1e6


@dataclass(frozen=True)
class CarrierSnrMatrix:
    """Per-carrier linear SNR of every user on every beam.

    `snr[k, n]` is evaluated at the current center of beam k. `feasible[k, n]`
    marks users within the maximum service radius of beam k; entries outside
    it keep their (small) physical SNR but are excluded from allocation.
    """

    snr: np.ndarray
    feasible: np.ndarray

    def __post_init__(self):
        if self.snr.shape != self.feasible.shape:
            raise ValueError("snr and feasibility shapes differ")
        if np.any(self.snr < 0):
            raise ValueError("negative SNR entry")


def _taper(u):
    """(J1(u)/(2u) + 36 J3(u)/u^3)^2 with the analytic u -> 0 limit."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-4
    us = np.where(small, 1.0, u)
    f_large = j1(us) / (2.0 * us) + 36.0 * jv(3, us) / us ** 3
    # ascending-series limit: J1(u)/(2u) -> 1/4, 36 J3(u)/u^3 -> 3/4
    u2 = u * u
    f_small = (0.25 - u2 / 32.0) + (0.75 - 0.75 * u2 / 16.0)
    f = np.where(small, f_small, f_large)
    return f * f


def beam_gain(d_km, antenna: AntennaModel):
    """Linear transmit gain toward a point `d_km` from the beam axis.

    Accepts scalars or arrays. Exactly g_max at d = 0.
    """
    d = np.asarray(d_km, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    u = antenna.taper_scale * d / antenna.beam_radius_km
    g = antenna.g_max * _taper(u)
    g = np.where(d == 0.0, antenna.g_max, g)
    if np.ndim(d_km) == 0:
        return float(g)
    return g


def carrier_snr(user_pos, beam_center, antenna: AntennaModel, link: LinkParams):
    """Linear SNR of one carrier serving a user from a beam center."""
    d = math.hypot(user_pos[0] - beam_center[0], user_pos[1] - beam_center[1])
    return (link.carrier_tx_power_w * beam_gain(d, antenna) * link.net_path_factor
            / link.noise_power_w)


def carrier_snr_matrix(user_xy: np.ndarray, centers: np.ndarray,
                       antenna: AntennaModel, link: LinkParams,
                       max_service_radius_km: float) -> CarrierSnrMatrix:
    """Vectorized carrier SNR of all users against all beams.

    Returns a (K, N) matrix plus the service-radius feasibility mask.
    """
    user_xy = np.asarray(user_xy, dtype=float)
    centers = np.asarray(centers, dtype=float)
    d = np.hypot(centers[:, None, 0] - user_xy[None, :, 0],
                 centers[:, None, 1] - user_xy[None, :, 1])
    snr = (link.carrier_tx_power_w * beam_gain(d, antenna) * link.net_path_factor
           / link.noise_power_w)
    return CarrierSnrMatrix(snr=snr, feasible=d <= max_service_radius_km)


def shannon_rate(bandwidth_mhz, snr):
    """Offered rate bandwidth * log2(1 + snr), in Mbps for MHz input."""
    bw = np.asarray(bandwidth_mhz, dtype=float)
    s = np.asarray(snr, dtype=float)
    if np.any(bw < 0) or np.any(s < 0):
        raise ValueError("bandwidth and snr must be nonnegative")
    r = bw * np.log2(1.0 + s)
    if np.ndim(bandwidth_mhz) == 0 and np.ndim(snr) == 0:
        return float(r)
    return r


def spectral_efficiency(snr):
    """log2(1 + snr): offered Mbps per allocated MHz."""
    return np.log2(1.0 + np.asarray(snr, dtype=float))


def calibrate_carrier_power(total_demand_mbps: float, n_beams: int,
                            carriers_per_beam: int,
                            antenna: AntennaModel, link: LinkParams) -> tuple[float, float]:
    """Carrier transmit power making capacity equal aggregate demand.

    Solves for the on-axis reference SNR s* at which a beam carrying its
    uniform share of the band (carriers_per_beam carriers) offers exactly
    total_demand / n_beams to on-axis users, then inverts the link budget:

        s* = 2^(design_rate / (carriers_per_beam * W)) - 1
        P  = s* k_B W / (g_max * net_path_factor)

    Returns (carrier_tx_power_w, reference_snr).
    """
    if total_demand_mbps <= 0 or n_beams <= 0 or carriers_per_beam <= 0:
        raise ValueError("demand, beam count, and carrier count must be positive")
    design_rate = total_demand_mbps / n_beams
    se = design_rate / (carriers_per_beam * link.carrier_bandwidth_mhz)
    snr_ref = 2.0 ** se - 1.0
    power = snr_ref * link.noise_power_w / (antenna.g_max * link.net_path_factor)
    return power, snr_ref


def calibrated_link(total_demand_mbps: float, n_beams: int, carriers_per_beam: int,
                    antenna: AntennaModel | None = None,
                    link: LinkParams | None = None) -> LinkParams:
    """A LinkParams copy with the calibrated carrier power filled in."""
    antenna = antenna or AntennaModel()
    link = link or LinkParams()
    power, _ = calibrate_carrier_power(total_demand_mbps, n_beams,
                                       carriers_per_beam, antenna, link)
    return LinkParams(
        receive_gain_over_temp_db=link.receive_gain_over_temp_db,
        free_space_loss_db=link.free_space_loss_db,
        atmospheric_loss_db=link.atmospheric_loss_db,
        depointing_loss_db=link.depointing_loss_db,
        carrier_bandwidth_mhz=link.carrier_bandwidth_mhz,
        carrier_tx_power_w=power,
        boltzmann_k=link.boltzmann_k,
        noise_temp_k=link.noise_temp_k,
    )
