#include <stdio.h>
#include <string.h>

#include "hyfacial.h"

#define CHECK(cond)                                                        \
    do {                                                                   \
        if (!(cond)) {                                                     \
            const char *m = hyf_last_error_message();                      \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
                    m ? m : "no message");                                 \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(int argc, char **argv) {
    double pixels[64 * 64];
    for (int y = 0; y < 64; y++)
        for (int x = 0; x < 64; x++)
            pixels[y * 64 + x] = (y >= 20 && y < 30 && x >= 22 && x < 40) ? 0.8 : 0.1;

    HyfImage *img = NULL;
    CHECK(hyf_image_new(64, 64, pixels, &img) == HYF_STATUS_OK);

    HyfDescriptors *orb = NULL;
    CHECK(hyf_orb_describe(img, &orb) == HYF_STATUS_OK);
    CHECK(hyf_descriptors_dim(orb) == 256);
    CHECK(hyf_descriptors_len(orb) > 0);
    double kp[4], bits[256];
    CHECK(hyf_descriptors_keypoint(orb, 0, kp) == HYF_STATUS_OK);
    CHECK(hyf_descriptors_row(orb, 0, bits, 256) == HYF_STATUS_OK);
    CHECK(hyf_descriptors_row(orb, 0, bits, 3) == HYF_STATUS_INVALID_ARGUMENT);
    CHECK(hyf_last_error_message() != NULL);
    hyf_descriptors_free(orb);

    HyfDescriptors *sift = NULL;
    CHECK(hyf_sift_describe(img, &sift) == HYF_STATUS_OK);
    CHECK(hyf_descriptors_dim(sift) == 128);
    hyf_descriptors_free(sift);
    hyf_image_free(img);

    CHECK(hyf_image_new(4, 4, NULL, &img) == HYF_STATUS_NULL_POINTER);

    if (argc > 1) {
        HyfDeepFeatures *t = NULL;
        CHECK(hyf_deep_features_load(argv[1], &t) == HYF_STATUS_OK);
        CHECK(hyf_deep_features_len(t) == 200);
        char *id = NULL;
        CHECK(hyf_deep_features_id(t, 0, &id) == HYF_STATUS_OK);
        CHECK(strcmp(id, "0") == 0);
        hyf_string_free(id);
        hyf_deep_features_free(t);
    }
    printf("ok %s\n", hyf_version());
    return 0;
}
