from enum import Enum


class Method(Enum):
    CONDITIONAL = "conditional"
    HECKMAN = "heckman"
    CML = "cml"
    IPW = "ipw"
    NAIVE = "naive"

    def __str__(self):
        return self.value


class Dichotomization(Enum):
    # strict: outcome = 1 when the measurement exceeds the threshold
    STRICT = "strict"
    # inclusive: outcome = 1 when the measurement reaches the threshold
    INCLUSIVE = "inclusive"

    def __str__(self):
        return self.value


class CensoringConvention(Enum):
    FACE_VALUE = "face_value"
    # drop pairs holding a censored time that does not exceed the threshold
    DROP_CENSORED_BELOW = "drop_censored_below"

    def __str__(self):
        return self.value


class TauKind(Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"
    STUDENT_T = "t"
    CAUCHY = "cauchy"
    NORMAL_MIXTURE = "mixture"

    def __str__(self):
        return self.value


class CovariateLaw(Enum):
    NONE = "none"
    STANDARD = "standard"
    IPW_DESIGN = "ipw_design"

    def __str__(self):
        return self.value


class TreatmentLaw(Enum):
    BERNOULLI = "bernoulli"
    PROPENSITY_LOGISTIC = "propensity_logistic"

    def __str__(self):
        return self.value


class OutputFormat(Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"

    def __str__(self):
        return self.value
