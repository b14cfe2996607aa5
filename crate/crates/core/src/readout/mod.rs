//! Semi-classical readout: the cavity amplitude for each qubit state under a
//! flux pulse and a coherent drive, and the SNR it implies.

mod cavity;
mod pulse;
mod snr;

pub use cavity::{
    drive_from_photons, integrate_cavity, integrate_cavity_with, integrate_with_table,
    photon_ring_up_fraction, ring_up_window, CavityTrajectory, DispersiveTable, DriveSpec,
    QubitState, Traversal, DISPERSIVE_TABLE_POINTS, DISPERSIVE_VALIDITY,
};
pub use pulse::{make_flux_pulse, FluxPulse};
pub(crate) use snr::interpolate;
pub use snr::{snr_limited_error, snr_vs_time, SnrCurve};
