/* tslint:disable */
/* eslint-disable */

/**
 * Result of [`simulate_bridge`].
 */
export class BridgeRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    mean(): number;
    n_drawn(): number;
    n_points(): number;
    /**
     * Drawn paths, one after another, each `n_points` long.
     */
    paths(): Float64Array;
    prob_no_exit(): number;
    prob_upper(): number;
    /**
     * Quadrature mean exit time, NaN when the endpoint lies inside the band.
     */
    reference(): number;
    se(): number;
}

export function kolmogorov_curve(x_min: number, x_max: number, points: number): Float64Array;

export function limit_scan(process: string, y: number, horizon: number, h_max: number, count: number): Float64Array;

export function simulate_bridge(y: number, horizon: number, h: number, n_paths: number, n_steps: number, seed: number): BridgeRun;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_bridgerun_free: (a: number, b: number) => void;
    readonly bridgerun_mean: (a: number) => number;
    readonly bridgerun_n_drawn: (a: number) => number;
    readonly bridgerun_n_points: (a: number) => number;
    readonly bridgerun_paths: (a: number) => [number, number];
    readonly bridgerun_prob_no_exit: (a: number) => number;
    readonly bridgerun_prob_upper: (a: number) => number;
    readonly bridgerun_reference: (a: number) => number;
    readonly bridgerun_se: (a: number) => number;
    readonly kolmogorov_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly limit_scan: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly simulate_bridge: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
