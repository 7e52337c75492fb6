//! Synthesis formulations as SOS programs and their compilation to SDPs.

pub mod affine;
pub mod gram;
pub mod program;
pub mod sdp;
pub mod sdpa;

pub use affine::{AffineMatrix, AffinePoly, LinExpr};
pub use gram::{compile_sos_matrix, GramBlock};
pub use program::{
    build, build_cor1, build_lsq, build_remark1, build_thm1, build_thm2, compile, decision_slices, Method, Objective,
    SosProgram, SynthesisOptions, SynthesisProblem,
};
pub use sdp::{EqRow, GramInfo, PsdBlock, SdpInstance, VarAlloc, VarSlice};
pub use sdpa::{parse_sdpa, read_sdpa, to_sdpa_string, write_sdpa};
