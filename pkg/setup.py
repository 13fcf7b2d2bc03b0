from setuptools import setup, find_packages


with open('README.md') as f:
    long_description = f.read()

with open('development_requirements.txt') as f:
    dev_requirements = f.read().splitlines()


requirements = [
    requirement.strip() for requirement in open("requirements.txt").readlines()
]

description = ("Robustness infidelity measures and sensitivities of "
               "spin network controllers under dephasing.")

setup(name="spinrim",
      version="0.1.0",
      description=description,
      long_description=long_description,
      long_description_content_type="text/markdown",
      license="MIT",
      python_requires=">=3.8",
      install_requires=requirements,
      extras_require={
            "development": set(dev_requirements),
            "test": dev_requirements
      },
      entry_points={
            "console_scripts": ["spinrim = spinrim.pipeline.cli:main"]
      },
      packages=find_packages(exclude=["examples*"])
      )
