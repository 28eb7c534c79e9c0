/* tslint:disable */
/* eslint-disable */

/**
 * Grey-level convolution with the named kernel, then ReLU and 2x2 max
 * pooling, rescaled to 0..=255. Returns RGBA of size
 * `(width / 2) x (height / 2)`.
 */
export function feature_map(rgba: Uint8Array, width: number, height: number, kernel_name: string): Uint8Array;

/**
 * Trains a small head on 3-class Gaussian blobs (60 train, 20
 * validation) until `epochs` or validation accuracy `threshold`. Returns
 * `[train_loss, val_accuracy]` per epoch, flattened.
 */
export function train_blobs(separation: number, noise: number, epochs: number, threshold: number, seed: number): Float64Array;

/**
 * Zoom-augments an RGBA image with factors drawn from
 * `[1 - zoom_range, 1 + zoom_range]`. Returns RGBA of the same size.
 */
export function zoom_preview(rgba: Uint8Array, width: number, height: number, zoom_range: number, seed: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly feature_map: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly train_blobs: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly zoom_preview: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
