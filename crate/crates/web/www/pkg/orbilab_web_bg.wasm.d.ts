/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lab_free: (a: number, b: number) => void;
export const __wbg_profile_free: (a: number, b: number) => void;
export const lab_concentration: (a: number) => [number, number, number, number];
export const lab_cone_level: (a: number) => number;
export const lab_converged: (a: number) => number;
export const lab_descend: (a: number) => [number, number];
export const lab_energy: (a: number) => number;
export const lab_field: (a: number) => [number, number];
export const lab_inject: (a: number, b: number, c: number) => [number, number];
export const lab_iterations: (a: number) => number;
export const lab_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const lab_photograph: (a: number, b: number) => [number, number, number, number];
export const lab_residual: (a: number) => number;
export const lab_resolution: (a: number) => number;
export const profile_m_e: (a: number) => number;
export const profile_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const profile_radii: (a: number) => [number, number];
export const profile_values: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
