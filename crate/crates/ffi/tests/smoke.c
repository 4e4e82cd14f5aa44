#include <stdio.h>
#include <string.h>
#include "lmm_wkb.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, lmm_last_error()); return 1; } } while (0)

int main(void) {
    LmmEngine *e = NULL;
    CHECK(lmm_engine_new_case_study(6, 1.0, &e) == LMM_STATUS_OK);
    CHECK(lmm_engine_num_rates(e) == 6);

    LmmEstimate r;
    CHECK(lmm_european(e, LMM_LEVEL_WKB1, 2000, 7, LMM_PRICE, &r) == LMM_STATUS_OK);
    CHECK(r.value > 0.0 && r.std_dev > 0.0 && r.samples == 2000);

    CHECK(lmm_bermudan(e, LMM_LEVEL_WKB1, 100, 7, LMM_PRICE, &r) == LMM_STATUS_NO_POLICY);
    CHECK(strlen(lmm_last_error()) > 0);
    CHECK(lmm_european(e, 42, 100, 7, LMM_PRICE, &r) == LMM_STATUS_INVALID_PARAMETER);
    CHECK(lmm_engine_from_config("/nonexistent.conf", NULL) == LMM_STATUS_NULL_POINTER);

    lmm_engine_free(e);
    lmm_engine_free(NULL);
    puts("ok");
    return 0;
}
