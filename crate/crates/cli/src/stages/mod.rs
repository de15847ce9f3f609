//! One module per subcommand. Each reads its inputs from files written by
//! earlier stages, so any stage can be re-run on its own.

pub mod fpca;
pub mod matching;
pub mod preprocess;
pub mod regress;
pub mod render;
pub mod simulate;
