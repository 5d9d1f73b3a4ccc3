//! Plot-level yield fusion: assembling multi-domain feature matrices, ridge
//! regression and k-fold cross-validation.

mod assemble;
mod cv;
mod matrix;
mod records;
mod ridge;
mod synthetic;

pub use assemble::{assemble, feature_domain, weather_summary, WEATHER_COLUMNS};
pub use cv::{
    exceeds_reference_yield, fold_assignment, kfold_cv, metrics_json, write_scatter_csv, CvReport,
    FoldReport, OofPrediction, REFERENCE_YIELD_KG_HA,
};
pub use matrix::{Column, Domain, DroppedRow, FeatureMatrix};
pub use records::{
    feature_columns, load_plot_features, load_weather, read_plot_features, read_weather,
    standardize_yield, write_plot_features, PlotFeatureRecord, WeatherRecord, DEFAULT_SITE,
    LABEL_COLUMNS, PHENOTYPING_FEATURES, RS_FEATURES,
};
pub use ridge::{fit_ridge, metrics, rmse, Metrics, RidgeModel};
pub use synthetic::{noise_sd_for_r2, planted_benchmark, theoretical_r2, DOMAIN_SIGNAL_SD};
