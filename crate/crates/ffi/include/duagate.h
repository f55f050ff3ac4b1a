#ifndef DUAGATE_H
#define DUAGATE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DgStatus {
  DG_STATUS_OK = 0,
  DG_STATUS_NULL_ARGUMENT = 1,
  DG_STATUS_INVALID_UTF8 = 2,
  // Malformed query, triple line, JSON or TOML.
  DG_STATUS_PARSE = 3,
  DG_STATUS_NOT_FOUND = 4,
  DG_STATUS_INVALID = 5,
  DG_STATUS_CONFLICT = 6,
  // A Rust panic was caught at the boundary; the handle may be unusable.
  DG_STATUS_PANIC = 7,
} DgStatus;

// An RDF graph.
typedef struct DgGraph DgGraph;

// A middleware instance. Calls on one handle may come from several threads.
typedef struct DgMiddleware DgMiddleware;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *dg_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or came from this library and has not been freed.
void dg_string_free(char *s);

// An empty graph. Never null.
struct DgGraph *dg_graph_new(void);

// The synthetic universe for `seed` with `patients` patients.
//
// # Safety
// `out` is writable.
enum DgStatus dg_graph_generate(uint64_t seed, uintptr_t patients, struct DgGraph **out);

// Adds the triples in `lines` (line format) and writes how many were new to
// `added`, which may be null. Nothing is added unless every line parses.
//
// # Safety
// `graph` is a live handle not used concurrently; `lines` is a C string.
enum DgStatus dg_graph_load(struct DgGraph *graph, const char *lines, uintptr_t *added);

// Triple count; 0 for null.
//
// # Safety
// `graph` is null or a live handle.
uintptr_t dg_graph_len(const struct DgGraph *graph);

// The graph in line format, sorted.
//
// # Safety
// `graph` is a live handle; `out` is writable.
enum DgStatus dg_graph_serialize(const struct DgGraph *graph, char **out);

// # Safety
// `graph` is null or a live handle that is not used afterwards.
void dg_graph_free(struct DgGraph *graph);

// Runs a query. ASK yields `{"boolean":b}`, SELECT yields
// `{"variables":[..],"rows":[[..]]}` and an update yields
// `{"deleted":n,"inserted":m}` after modifying the graph.
//
// # Safety
// `graph` is a live handle not used concurrently; `query` is a C string;
// `out` is writable.
enum DgStatus dg_query(struct DgGraph *graph, const char *query, char **out);

// A middleware instance over `graph` with the built-in policies. The graph
// handle is consumed on success and on failure. `config_toml` may be null
// for defaults.
//
// # Safety
// `graph` is a live handle not used afterwards; `config_toml` is null or a
// C string; `out` is writable.
enum DgStatus dg_middleware_new(struct DgGraph *graph,
                                const char *config_toml,
                                struct DgMiddleware **out);

// Handles one data request given as JSON and writes the response as JSON.
//
// # Safety
// `tm` is a live handle; `request_json` is a C string; `out` is writable.
enum DgStatus dg_middleware_handle_request(const struct DgMiddleware *tm,
                                           const char *request_json,
                                           char **out);

// The trust record of a user or organization IRI as JSON.
//
// # Safety
// `tm` is a live handle; `principal` is a C string; `out` is writable.
enum DgStatus dg_middleware_trust(const struct DgMiddleware *tm, const char *principal, char **out);

// Rewrites an agreement (JSON) and resets the lockout it caused. Fails with
// `Conflict` when the pair is not locked out.
//
// # Safety
// `tm` is a live handle; `dua_json` is a C string.
enum DgStatus dg_middleware_rewrite_dua(const struct DgMiddleware *tm, const char *dua_json);

// # Safety
// `tm` is null or a live handle that is not used afterwards.
void dg_middleware_free(struct DgMiddleware *tm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUAGATE_H */
