//! Interpretability measurements: per-neuron absolute correlation, SSIM
//! between saliency maps, and the report that collects them.

mod correlation;
mod report;
mod robustness;
mod ssim;

pub use correlation::{abs_correlation, correlation_table, mean_std, Correlation, CorrelationTable, Reference};
pub use report::{MetricsReport, ModelReport, ReportMetadata, SeasonReport, ValidationSummary, REPORT_FORMAT_VERSION};
pub use robustness::{noise_seed, saliency_ssim, ssim_robustness, BoxStats, SsimSamples, DEFAULT_VARIANCES};
pub use ssim::{gaussian_taps, ssim, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
