/* tslint:disable */
/* eslint-disable */

/**
 * A field on a 2D preset together with its problem parameters.
 */
export class Lab {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Concentration function of `(u⁺)^p` on the covering grid.
     */
    concentration(): Float64Array;
    /**
     * Runs the Nehari descent from the current field.
     */
    descend(): void;
    /**
     * Field values on the covering grid, row `j` then column `i`.
     */
    field(): Float64Array;
    /**
     * Replaces the field by the projected bump centered at `(x, y)`.
     */
    inject(x: number, y: number): void;
    constructor(preset: string, grid: number, eps: number, p: number);
    /**
     * Photograph of the field: `[cc, x, y]`.
     */
    photograph(eta: number): Float64Array;
    /**
     * `m(E)/ζ`, the limit of the least energy level.
     */
    readonly cone_level: number;
    readonly converged: boolean;
    readonly energy: number;
    readonly iterations: number;
    readonly residual: number;
    readonly resolution: number;
}

/**
 * Radial ground state sampled on `[0, r_max]`.
 */
export class Profile {
    free(): void;
    [Symbol.dispose](): void;
    constructor(n: number, p: number, samples: number, r_max: number);
    radii(): Float64Array;
    values(): Float64Array;
    readonly m_e: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lab_free: (a: number, b: number) => void;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly lab_concentration: (a: number) => [number, number, number, number];
    readonly lab_cone_level: (a: number) => number;
    readonly lab_converged: (a: number) => number;
    readonly lab_descend: (a: number) => [number, number];
    readonly lab_energy: (a: number) => number;
    readonly lab_field: (a: number) => [number, number];
    readonly lab_inject: (a: number, b: number, c: number) => [number, number];
    readonly lab_iterations: (a: number) => number;
    readonly lab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly lab_photograph: (a: number, b: number) => [number, number, number, number];
    readonly lab_residual: (a: number) => number;
    readonly lab_resolution: (a: number) => number;
    readonly profile_m_e: (a: number) => number;
    readonly profile_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly profile_radii: (a: number) => [number, number];
    readonly profile_values: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
