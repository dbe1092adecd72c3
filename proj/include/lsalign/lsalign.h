#ifndef LSALIGN_H
#define LSALIGN_H

/* C interface to the lsalign SDF fitter.
 *
 * Every call returns an lsa_status; on failure lsa_last_error() holds a
 * message for the calling thread until its next failing call. Objects are
 * opaque and owned by the caller once returned; free them with the matching
 * *_free function. Configuration travels as flat "key = value" text, one
 * setting per line. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define LSA_API __declspec(dllexport)
#elif defined(LSALIGN_BUILDING)
#  define LSA_API __attribute__((visibility("default")))
#else
#  define LSA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsa_status {
    LSA_OK = 0,
    LSA_ERR_INVALID_ARGUMENT = 1, /* null pointer or out-of-range argument */
    LSA_ERR_CONFIG = 2,           /* setting failed validation */
    LSA_ERR_PARSE = 3,            /* malformed input file */
    LSA_ERR_IO = 4,
    LSA_ERR_NUMERIC = 5,          /* non-finite loss, vanishing gradients */
    LSA_ERR_EMPTY = 6,            /* empty cloud or mesh */
    LSA_ERR_GRAPH = 7,
    LSA_ERR_INTERNAL = 8
} lsa_status;

typedef struct lsa_cloud lsa_cloud;
typedef struct lsa_network lsa_network;
typedef struct lsa_mesh lsa_mesh;

LSA_API const char* lsa_version(void);
LSA_API const char* lsa_status_name(lsa_status status);
LSA_API const char* lsa_last_error(void);

/* Parses and validates a run configuration without running anything.
 * Writes the normalized settings text (every key) to `echo` when non-null;
 * free it with lsa_string_free. */
LSA_API lsa_status lsa_config_validate(const char* settings, char** echo);
LSA_API void lsa_string_free(char* s);

/* ---- point clouds (scene coordinates) ---------------------------------- */

/* Format from the extension: .xyz/.txt/.pts or .ply (ascii). */
LSA_API lsa_status lsa_cloud_load(const char* path, lsa_cloud** out);
/* "sphere:r=1", "box:hx=1,hy=1,hz=1", "torus:R=1,r=0.4", with optional cx/cy/cz. */
LSA_API lsa_status lsa_cloud_from_shape(const char* shape, size_t n, uint64_t seed, lsa_cloud** out);
LSA_API lsa_status lsa_cloud_size(const lsa_cloud* cloud, size_t* out);
LSA_API lsa_status lsa_cloud_save(const lsa_cloud* cloud, const char* path);
LSA_API void lsa_cloud_free(lsa_cloud* cloud);

/* ---- training ----------------------------------------------------------- */

typedef struct lsa_fit_summary {
    size_t steps;
    double baseline;          /* last logged values */
    double alignment;
    double mean_beta;
    double probe_consistency; /* mean over the frozen probe set after training */
    double alpha;             /* weight actually used (after auto-balance) */
} lsa_fit_summary;

/* Called after each logged step. */
typedef void (*lsa_log_fn)(size_t step, double baseline, double alignment, double mean_beta,
                          double mean_consistency, void* user);

/* Trains on the supervision named by `input` or `shape`. When `out` is set,
 * writes config.txt, model.ckpt, trainer.state and history.csv there.
 * `summary`, `log` and `net` may be null. */
LSA_API lsa_status lsa_fit(const char* settings, lsa_log_fn log, void* user, lsa_fit_summary* summary,
                           lsa_network** net);

/* ---- networks (inputs in normalized coordinates) ------------------------ */

LSA_API lsa_status lsa_network_load(const char* path, lsa_network** out);
LSA_API lsa_status lsa_network_save(const lsa_network* net, const char* path);
/* values[i] = f(xyz[3i..3i+2]); gradients (3n, optional) receive the spatial gradient. */
LSA_API lsa_status lsa_network_predict(const lsa_network* net, const double* xyz, size_t n, double* values,
                                       double* gradients);
/* normalized = (scene - center) * scale */
LSA_API lsa_status lsa_network_normalization(const lsa_network* net, double center[3], double* scale);
LSA_API lsa_status lsa_network_parameter_count(const lsa_network* net, size_t* out);
LSA_API void lsa_network_free(lsa_network* net);

/* ---- meshes ---------------------------------------------------------------- */

typedef struct lsa_grid {
    int resolution; /* nodes per axis, >= 8 */
    double bound;   /* cube [-bound, bound]^3 in normalized coordinates */
    double iso;
} lsa_grid;

LSA_API lsa_grid lsa_grid_default(void);

/* Marching cubes on the level set `grid->iso`; vertices in scene coordinates.
 * An absent level set gives an empty mesh, not an error. */
LSA_API lsa_status lsa_extract(const lsa_network* net, const lsa_grid* grid, lsa_mesh** out);
LSA_API lsa_status lsa_mesh_load(const char* path, lsa_mesh** out);
/* format: "obj", "ply", or null to follow the extension. */
LSA_API lsa_status lsa_mesh_save(const lsa_mesh* mesh, const char* path, const char* format);
LSA_API lsa_status lsa_mesh_counts(const lsa_mesh* mesh, size_t* vertices, size_t* faces);
LSA_API void lsa_mesh_free(lsa_mesh* mesh);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct lsa_eval_report {
    double cd; /* 0.5 * (mean nearest distance A->B + B->A), scene units */
    double nc; /* in [0, 1] */
    size_t samples_reconstruction;
    size_t samples_reference;
    uint64_t seed;
} lsa_eval_report;

/* Empty meshes fail with LSA_ERR_EMPTY. */
LSA_API lsa_status lsa_evaluate_shape(const lsa_mesh* mesh, const char* shape, size_t samples, uint64_t seed,
                                      lsa_eval_report* out);
LSA_API lsa_status lsa_evaluate_mesh(const lsa_mesh* mesh, const lsa_mesh* reference, size_t samples, uint64_t seed,
                                     lsa_eval_report* out);
/* Reference points (and normals if present) taken directly from the cloud. */
LSA_API lsa_status lsa_evaluate_cloud(const lsa_mesh* mesh, const lsa_cloud* reference, size_t samples,
                                      uint64_t seed, lsa_eval_report* out);
/* key=value file; `csv_path` (optional) receives a header and one row. */
LSA_API lsa_status lsa_eval_report_write(const lsa_eval_report* report, const char* path, const char* csv_path);

/* ---- slices -------------------------------------------------------------- */

/* Plane orthogonal to axis 'x', 'y' or 'z' at `offset`, sampled on
 * [-1,1]^2 in normalized coordinates. Either output path may be null. */
LSA_API lsa_status lsa_slice(const lsa_network* net, char axis, double offset, int resolution, const char* csv_path,
                             const char* pgm_path);

/* ---- ablation ------------------------------------------------------------ */

typedef struct lsa_ablation_row {
    const char* variant;
    uint64_t seed;
    double alpha;
    double delta;
    const char* weight;
    const char* metric;
    const char* target;
    double cd;
    double nc;
    double mean_consistency;
} lsa_ablation_row;

/* Strings in `row` are valid only during the call. */
typedef void (*lsa_ablation_fn)(const lsa_ablation_row* row, void* user);

/* `grid` holds candidate lists, e.g. "alpha = 0,0.01\nseeds = 1,2,3\nmode = sweep".
 * Null, "default", or a grid naming no candidate axis selects the full
 * candidate lists (seeds and mode still apply). Writes ablation.csv to
 * the base config's `out` directory when set. */
LSA_API lsa_status lsa_ablate(const char* settings, const char* grid, lsa_ablation_fn row, void* user,
                              size_t* rows_out);

#ifdef __cplusplus
}
#endif

#endif /* LSALIGN_H */
