/* tslint:disable */
/* eslint-disable */

/**
 * The map `(z^2 + z/4, w^2 + w/2 + L z^2)` and the slice last drawn.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Heat map of the upper hyperbolic distance from `w` within its slice
     * component. Empty when no slice is drawn or `w` is outside it.
     */
    distance_image(w_re: number, w_im: number): Uint8Array;
    constructor(l: number);
    /**
     * `[center_re, center_im, half_width, resolution]` of the slice last drawn.
     */
    slice_box(): Float64Array;
    /**
     * RGBA picture of the slice over `z`, shaded by entry time.
     */
    slice_image(z_re: number, z_im: number, resolution: number): Uint8Array;
}

/**
 * Exact check of the two inequalities for rational `L`, `B`, as JSON.
 */
export function verify_example(l: string, b: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_distance_image: (a: number, b: number, c: number) => [number, number];
    readonly demo_new: (a: number) => number;
    readonly demo_slice_box: (a: number) => [number, number];
    readonly demo_slice_image: (a: number, b: number, c: number, d: number) => [number, number];
    readonly verify_example: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
