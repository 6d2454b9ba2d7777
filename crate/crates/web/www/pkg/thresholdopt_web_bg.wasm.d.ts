/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_stabilityview_free: (a: number, b: number) => void;
export const __wbg_steklovview_free: (a: number, b: number) => void;
export const __wbg_thresholdview_free: (a: number, b: number) => void;
export const estimateStability: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const runThresholding: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const stabilityview_coercivity_bound: (a: number) => number;
export const stabilityview_curve_x: (a: number) => [number, number];
export const stabilityview_curve_y: (a: number) => [number, number];
export const stabilityview_lambda0: (a: number) => number;
export const stabilityview_segments: (a: number) => [number, number];
export const stabilityview_stable: (a: number) => number;
export const stabilityview_status: (a: number) => [number, number];
export const steklovInterval: (a: number, b: number) => [number, number, number];
export const steklovview_interface: (a: number) => [number, number];
export const steklovview_mode: (a: number) => [number, number];
export const steklovview_x: (a: number) => [number, number];
export const thresholdview_bounds: (a: number) => [number, number];
export const thresholdview_control: (a: number) => [number, number];
export const thresholdview_increments: (a: number) => [number, number];
export const thresholdview_nx: (a: number) => number;
export const thresholdview_ny: (a: number) => number;
export const thresholdview_objectives: (a: number) => [number, number];
export const thresholdview_status: (a: number) => [number, number];
export const thresholdview_switch: (a: number) => [number, number];
export const steklovview_continuum: (a: number) => number;
export const steklovview_lambda0: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
