#include <math.h>
#include <stdio.h>
#include "thermosense.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    TsSensorParams s = ts_sensor_default();
    TsContact c = ts_contact_default();

    double v = 0.0;
    CHECK(ts_erfc(0.0, &v) == TS_STATUS_OK && v == 1.0);
    CHECK(ts_erfc(NAN, &v) == TS_STATUS_DOMAIN);
    CHECK(ts_last_error() != NULL);

    TsPairPrediction p;
    CHECK(ts_predict_pair(&s, 1234.0, 1234.0, &c, 0.05, &p) == TS_STATUS_OK);
    CHECK(p.f1 == 0.5);

    TsF1Matrix *m = NULL;
    CHECK(ts_f1_matrix_new(&s, 0.0, 40000.0, 10, &c, 0.05, &m) == TS_STATUS_OK);
    CHECK(ts_f1_matrix_size(m) == 10);
    TsBinaryMap *map = NULL;
    CHECK(ts_binary_map_new(m, 0.9, &map) == TS_STATUS_OK);
    double pct = 0.0;
    CHECK(ts_binary_map_match(map, map, &pct) == TS_STATUS_OK && pct == 100.0);
    ts_binary_map_free(map);
    ts_f1_matrix_free(m);

    TsMaterialDb *db = NULL;
    CHECK(ts_material_db_builtin(&db) == TS_STATUS_OK);
    CHECK(ts_material_db_len(db) == 12);
    ts_material_db_free(db);

    printf("ok\n");
    return 0;
}
