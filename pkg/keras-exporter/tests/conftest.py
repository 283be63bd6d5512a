import os

# keep backend chatter out of test output; must precede the keras import
os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")
