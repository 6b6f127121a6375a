//! Name-based lookup of backends and emitters.

use crate::backend::{Backend, CEmitter, CompiledC, Emitter, Interpreter, IrEmitter};
use crate::error::{Error, Result};

type BackendCtor = fn() -> Box<dyn Backend>;
type EmitterCtor = fn() -> Box<dyn Emitter>;

const BACKENDS: &[(&str, BackendCtor)] = &[
    ("interp", || Box::new(Interpreter)),
    ("cc", || Box::new(CompiledC)),
];

const EMITTERS: &[(&str, EmitterCtor)] =
    &[("ir", || Box::new(IrEmitter)), ("c", || Box::new(CEmitter))];

pub fn backend_names() -> Vec<&'static str> {
    BACKENDS.iter().map(|(n, _)| *n).collect()
}

pub fn emitter_names() -> Vec<&'static str> {
    EMITTERS.iter().map(|(n, _)| *n).collect()
}

pub fn backend(name: &str) -> Result<Box<dyn Backend>> {
    BACKENDS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make())
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "backend",
            name: name.to_string(),
            available: backend_names().join(", "),
        })
}

pub fn emitter(name: &str) -> Result<Box<dyn Emitter>> {
    EMITTERS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make())
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "emitter",
            name: name.to_string(),
            available: emitter_names().join(", "),
        })
}
