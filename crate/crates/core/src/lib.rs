//! Simulation and optimization of a regional transition from Level-2 EV
//! chargers to ultra-fast chargers (UFC).
//!
//! The pipeline is arrivals → aggregate charging power (4-minute grid) →
//! 15-minute billing profile → TOU energy and demand charges → stakeholder
//! objectives, swept over the UFC share. Battery peak shaving operates on the
//! billing profile.
//!
//! Scenario evaluation fans out over rayon when the `parallel` feature is on
//! (the default); without it every [`Execution`] mode runs sequentially.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrival;
pub mod error;
pub mod exec;
pub mod fleet;
pub mod inventory;
pub mod objectives;
pub mod peakshave;
pub mod sweep;
pub mod tariff;

pub use arrival::ArrivalProfile;
pub use error::{Error, Result};
pub use exec::Execution;
pub use fleet::{BillingProfile, ChargerTech, PowerProfile};
pub use objectives::{GridContext, ScenarioResult, VotModel};
pub use peakshave::{Battery, DispatchPlan};
pub use tariff::{CostBreakdown, Period, Season, StationCostParams, TariffBook, TouSchedule};

/// Length of one simulation slot in minutes.
pub const SLOT_MINUTES: u32 = 4;
/// Length of one billing interval in minutes.
pub const BILLING_MINUTES: u32 = 15;
pub const MINUTES_PER_DAY: u32 = 24 * 60;
/// One week of 4-minute slots.
pub const WEEK_SLOTS: usize = 7 * (MINUTES_PER_DAY / SLOT_MINUTES) as usize;
/// Non-residential plugs in the study region.
pub const REGION_PLUGS: f64 = 3500.0;
