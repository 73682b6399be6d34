/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const class_names: () => [number, number];
export const model_names: () => [number, number];
export const quick_benchmark: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const simulate: (a: number, b: bigint, c: bigint) => [number, number, number, number];
export const subband_energies: (a: number, b: bigint, c: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
