/* tslint:disable */
/* eslint-disable */

export class StabilityView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly coercivity_bound: number;
    /**
     * Quadrature points of the interface.
     */
    readonly curve_x: Float64Array;
    readonly curve_y: Float64Array;
    readonly lambda0: number;
    /**
     * Pairs of point indices joined by a curve segment.
     */
    readonly segments: Uint32Array;
    readonly stable: boolean;
    readonly status: string;
}

export class SteklovView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `(2 - eps) / eps`
     */
    readonly continuum: number;
    /**
     * Interface points.
     */
    readonly interface: Float64Array;
    readonly lambda0: number;
    /**
     * Principal mode, scaled to unit maximum.
     */
    readonly mode: Float64Array;
    /**
     * Cell centers.
     */
    readonly x: Float64Array;
}

export class ThresholdView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Lattice extent `[xmin, xmax, ymin, ymax]`.
     */
    readonly bounds: Float64Array;
    /**
     * Final control.
     */
    readonly control: Float64Array;
    readonly increments: Float64Array;
    readonly nx: number;
    readonly ny: number;
    /**
     * Objective per iteration, then the final value.
     */
    readonly objectives: Float64Array;
    readonly status: string;
    /**
     * Final switch field.
     */
    readonly switch: Float64Array;
}

export function estimateStability(objective: string, domain: string, n: number, v0: number, init: string, seed: number): StabilityView;

export function runThresholding(objective: string, domain: string, n: number, v0: number, init: string, seed: number): ThresholdView;

export function steklovInterval(n: number, eps: number): SteklovView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_stabilityview_free: (a: number, b: number) => void;
    readonly __wbg_steklovview_free: (a: number, b: number) => void;
    readonly __wbg_thresholdview_free: (a: number, b: number) => void;
    readonly estimateStability: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly runThresholding: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly stabilityview_coercivity_bound: (a: number) => number;
    readonly stabilityview_curve_x: (a: number) => [number, number];
    readonly stabilityview_curve_y: (a: number) => [number, number];
    readonly stabilityview_lambda0: (a: number) => number;
    readonly stabilityview_segments: (a: number) => [number, number];
    readonly stabilityview_stable: (a: number) => number;
    readonly stabilityview_status: (a: number) => [number, number];
    readonly steklovInterval: (a: number, b: number) => [number, number, number];
    readonly steklovview_interface: (a: number) => [number, number];
    readonly steklovview_mode: (a: number) => [number, number];
    readonly steklovview_x: (a: number) => [number, number];
    readonly thresholdview_bounds: (a: number) => [number, number];
    readonly thresholdview_control: (a: number) => [number, number];
    readonly thresholdview_increments: (a: number) => [number, number];
    readonly thresholdview_nx: (a: number) => number;
    readonly thresholdview_ny: (a: number) => number;
    readonly thresholdview_objectives: (a: number) => [number, number];
    readonly thresholdview_status: (a: number) => [number, number];
    readonly thresholdview_switch: (a: number) => [number, number];
    readonly steklovview_continuum: (a: number) => number;
    readonly steklovview_lambda0: (a: number) => number;
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
