//! Inner approximate solvers: ILU(0), point-block ILU(0), (S)SOR and classical AMG.

pub mod amg;
pub mod ilu;
pub mod sor;

pub use amg::{AmgConfig, AmgHierarchy, Coarsening, HierarchyStats, Smoother};
pub use ilu::{BlockIlu0, Ilu0};
pub use sor::{sor_sweep, Sor};
pub use crate::sparse::dense_solve;
