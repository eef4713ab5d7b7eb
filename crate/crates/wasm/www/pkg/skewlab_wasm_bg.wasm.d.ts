/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_distance_image: (a: number, b: number, c: number) => [number, number];
export const demo_new: (a: number) => number;
export const demo_slice_box: (a: number) => [number, number];
export const demo_slice_image: (a: number, b: number, c: number, d: number) => [number, number];
export const verify_example: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
