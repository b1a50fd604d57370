/* tslint:disable */
/* eslint-disable */

/**
 * Closed forms against the characteristics solver; `case` is
 * `"constant_a"` or `"linear_a"`.
 */
export function continuum_curves(_case: string, alpha: number, beta: number, t_max: number, n_samples: number): string;

/**
 * Bound check on the chain `b_n = √(α₀ n(n−1)/4 + γ₀ n/2)`, cut at the
 * first sample the truncation reaches.
 */
export function saturation_demo(alpha0: number, gamma0: number, k: number, t_max: number, n_samples: number): string;

/**
 * Coefficients, complexity and bound for a small transverse-field Ising chain.
 */
export function tfim_demo(n_sites: number, g: number, h: number, alpha: number, gamma: number, t_max: number, n_samples: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly continuum_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly saturation_demo: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly tfim_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
