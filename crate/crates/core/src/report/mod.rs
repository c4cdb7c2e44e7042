//! Run configuration, pipeline orchestration, figures and the synthetic
//! end-to-end fixture.

pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod svg;

pub use config::{RunConfig, Stage, KEYS};
pub use fixture::{write_fixture, FixtureOptions, FixturePaths};
pub use pipeline::{create_run_dir, exit_code, ingest_check, run_pipeline, ManifestEntry, RunOutcome};
pub use svg::{
    read_trajectories, render_figure, render_grid_bars, render_trajectories, FigureKind, FigureSpec, Trajectory,
};
