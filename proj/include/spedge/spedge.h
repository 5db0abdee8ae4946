#ifndef SPEDGE_H
#define SPEDGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(SPEDGE_BUILDING)
#define SPEDGE_API __attribute__((visibility("default")))
#else
#define SPEDGE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spedge_status {
  SPEDGE_OK = 0,
  SPEDGE_E_ARGUMENT = 1,
  SPEDGE_E_IO = 2,
  SPEDGE_E_FORMAT = 3,
  SPEDGE_E_CORRUPTION = 4,
  SPEDGE_E_ORDERING = 5,
  SPEDGE_E_GAP = 6,
  SPEDGE_E_NUMERICAL = 7,
  SPEDGE_E_DEGENERATE = 8,
  SPEDGE_E_UNDEFINED = 9,
  SPEDGE_E_NOT_APPLICABLE = 10,
  SPEDGE_E_INTERNAL = 99
} spedge_status;

typedef struct spedge_stream spedge_stream;
typedef struct spedge_snapshot spedge_snapshot;

SPEDGE_API const char* spedge_version(void);
SPEDGE_API const char* spedge_status_name(spedge_status s);
/* Message of the last failing call on this thread; never NULL. */
SPEDGE_API const char* spedge_last_error(void);
/* Caps worker threads for this process; 0 restores SPEDGE_THREADS / hardware. */
SPEDGE_API void spedge_set_threads(int n);

/* Streams: binary stream files or JSON manifests. */
SPEDGE_API spedge_status spedge_stream_open(const char* path, spedge_stream** out);
SPEDGE_API void spedge_stream_free(spedge_stream* s);
SPEDGE_API size_t spedge_stream_count(const spedge_stream* s);
SPEDGE_API uint64_t spedge_stream_dim(const spedge_stream* s);
/* Copies record i's delta into buf (length >= dim). */
SPEDGE_API spedge_status spedge_stream_delta(const spedge_stream* s, size_t i, double* buf,
                                             size_t len);

/* Spectrum of the window [t0, t0 + W). */
SPEDGE_API spedge_status spedge_analyze_window(const spedge_stream* s, int64_t t0, size_t W,
                                               double eps_floor, spedge_snapshot** out);
SPEDGE_API void spedge_snapshot_free(spedge_snapshot* s);
SPEDGE_API int spedge_snapshot_kstar(const spedge_snapshot* s);
SPEDGE_API double spedge_snapshot_ratio(const spedge_snapshot* s);
SPEDGE_API double spedge_snapshot_gap(const spedge_snapshot* s);
/* Writes up to len singular values, returns the number available. */
SPEDGE_API size_t spedge_snapshot_sigmas(const spedge_snapshot* s, double* buf, size_t len);

SPEDGE_API spedge_status spedge_ratio_significance(double R, size_t W, uint64_t p, size_t n_mc,
                                                   uint64_t seed, double* p_value, double* q95);

/* Runs analyze | simulate | synth | nulldist on a JSON config. On success
 * *report_json receives the report; release it with spedge_string_free. */
SPEDGE_API spedge_status spedge_run(const char* command, const char* config_json,
                                    char** report_json);
SPEDGE_API void spedge_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
