/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_bridgerun_free: (a: number, b: number) => void;
export const bridgerun_mean: (a: number) => number;
export const bridgerun_n_drawn: (a: number) => number;
export const bridgerun_n_points: (a: number) => number;
export const bridgerun_paths: (a: number) => [number, number];
export const bridgerun_prob_no_exit: (a: number) => number;
export const bridgerun_prob_upper: (a: number) => number;
export const bridgerun_reference: (a: number) => number;
export const bridgerun_se: (a: number) => number;
export const kolmogorov_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const limit_scan: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const simulate_bridge: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
