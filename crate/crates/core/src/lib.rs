//! A proof-checking kernel for intuitionistic linear dependent type theory,
//! with a judgemental-equality engine and a denotational evaluator into
//! families of finite pointed sets.

pub mod fam;
pub mod syntax;
pub mod parser;
pub mod equality;
pub mod checker;
pub mod interp;
pub mod model;
pub mod report;
pub mod theorems;
pub mod gen;
pub mod session;
pub mod soundness;
pub mod corpus;
pub mod linearity;
pub mod metatheory;
