"""The While language with arrays: syntax, semantics, typing and instrumentation."""
